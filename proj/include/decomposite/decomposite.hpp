#pragma once

#include "decomposite/core_linalg.hpp"
#include "decomposite/rmt_spectrum.hpp"
#include "decomposite/shrinkage.hpp"
#include "decomposite/mean_tests.hpp"
#include "decomposite/power_analysis.hpp"
#include "decomposite/bootstrap.hpp"
