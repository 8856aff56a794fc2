#pragma once

#include "gboost/core.hpp"
#include "gboost/engine.hpp"
#include "gboost/errors.hpp"
#include "gboost/policy.hpp"
#include "gboost/reward.hpp"

#include "gboost/backends/counting.hpp"
#include "gboost/backends/remote.hpp"
#include "gboost/backends/synthetic.hpp"
#include "gboost/backends/wire.hpp"

#include "gboost/harness/baselines.hpp"
#include "gboost/harness/benchmark.hpp"
#include "gboost/harness/config.hpp"
#include "gboost/harness/datasets.hpp"
#include "gboost/harness/tasks.hpp"
#include "gboost/harness/trace_io.hpp"
