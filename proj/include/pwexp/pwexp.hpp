#pragma once

#include "pwexp/accrual.hpp"
#include "pwexp/distribution.hpp"
#include "pwexp/estimation.hpp"
#include "pwexp/io.hpp"
#include "pwexp/prediction.hpp"
#include "pwexp/resampling.hpp"
#include "pwexp/rng.hpp"
#include "pwexp/segmented.hpp"
#include "pwexp/simulation.hpp"
#include "pwexp/stats.hpp"
#include "pwexp/survdata.hpp"
