#pragma once

// Everything in one include.

#include "dkhac/error.hpp"
#include "dkhac/kernels.hpp"
#include "dkhac/parallel.hpp"
#include "dkhac/sls.hpp"
#include "dkhac/estimator.hpp"
#include "dkhac/bandwidths.hpp"
#include "dkhac/baselines.hpp"
#include "dkhac/hartests.hpp"
#include "dkhac/montecarlo.hpp"
#include "dkhac/tables.hpp"
#include "dkhac/io.hpp"
#include "dkhac/files.hpp"
