#pragma once

#include "excalibr/baselines.hpp"
#include "excalibr/bvn_policy.hpp"
#include "excalibr/calibration_lp.hpp"
#include "excalibr/core_model.hpp"
#include "excalibr/data_io.hpp"
#include "excalibr/harness.hpp"
#include "excalibr/matching.hpp"
#include "excalibr/metrics.hpp"
#include "excalibr/rng.hpp"
#include "excalibr/simplex.hpp"
