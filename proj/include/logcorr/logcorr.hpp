#pragma once

#include "logcorr/quadrature.hpp"
#include "logcorr/metric_space.hpp"
#include "logcorr/kernels.hpp"
#include "logcorr/test_function.hpp"
#include "logcorr/cov_functional.hpp"
#include "logcorr/rng.hpp"
#include "logcorr/parallel.hpp"
#include "logcorr/stats.hpp"
#include "logcorr/parity.hpp"
#include "logcorr/sampler.hpp"
#include "logcorr/aggregated.hpp"
