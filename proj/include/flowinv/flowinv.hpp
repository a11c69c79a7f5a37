#pragma once

// Umbrella header for the flowinv library: normalizing-flow priors and
// MAP/MLE solvers for inverse problems with structured noise.

#include "flowinv/adam.hpp"
#include "flowinv/checkpoint.hpp"
#include "flowinv/config.hpp"
#include "flowinv/dataset.hpp"
#include "flowinv/dct.hpp"
#include "flowinv/errors.hpp"
#include "flowinv/experiment.hpp"
#include "flowinv/flow.hpp"
#include "flowinv/forward_op.hpp"
#include "flowinv/hash.hpp"
#include "flowinv/losses.hpp"
#include "flowinv/metrics.hpp"
#include "flowinv/mlp.hpp"
#include "flowinv/noise.hpp"
#include "flowinv/numdiff.hpp"
#include "flowinv/parallel.hpp"
#include "flowinv/report.hpp"
#include "flowinv/rng.hpp"
#include "flowinv/solve.hpp"
#include "flowinv/tensor.hpp"
#include "flowinv/theory.hpp"
#include "flowinv/train.hpp"
