#pragma once

// Core library (no I/O dependencies). Include esp/io/*.hpp separately for
// JSON, raster and image files.

#include "esp/ellipse.hpp"
#include "esp/error.hpp"
#include "esp/grid.hpp"
#include "esp/metrics.hpp"
#include "esp/regularizer.hpp"
#include "esp/similarity.hpp"
#include "esp/solver.hpp"
#include "esp/stack.hpp"
