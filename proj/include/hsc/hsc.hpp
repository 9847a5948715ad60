#pragma once

// Umbrella header for the whole library.

#include "hsc/csv.hpp"
#include "hsc/difference_solver.hpp"
#include "hsc/errors.hpp"
#include "hsc/grid.hpp"
#include "hsc/model.hpp"
#include "hsc/orbit.hpp"
#include "hsc/pde.hpp"
#include "hsc/periodic.hpp"
#include "hsc/simulator.hpp"
#include "hsc/spectral.hpp"
#include "hsc/stability.hpp"
