#pragma once

#include "itersurv/composition.hpp"
#include "itersurv/config.hpp"
#include "itersurv/estimation.hpp"
#include "itersurv/fluctuation.hpp"
#include "itersurv/generators.hpp"
#include "itersurv/oracles.hpp"
#include "itersurv/parallel.hpp"
#include "itersurv/presets.hpp"
#include "itersurv/process.hpp"
#include "itersurv/report.hpp"
#include "itersurv/rng.hpp"
#include "itersurv/runner.hpp"
#include "itersurv/stats.hpp"
#include "itersurv/validate.hpp"
