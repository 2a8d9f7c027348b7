#pragma once

// Umbrella header for the model library.

#include "handy/errors.hpp"
#include "handy/params.hpp"
#include "handy/model.hpp"
#include "handy/integrator.hpp"
#include "handy/hypotheses.hpp"
#include "handy/equilibrium.hpp"
