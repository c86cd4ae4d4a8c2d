#pragma once

#include "swa/core_model.hpp"
#include "swa/switch_pipeline.hpp"
#include "swa/jitter_analysis.hpp"
#include "swa/scheduler.hpp"
#include "swa/sim_engine.hpp"
#include "swa/config.hpp"
#include "swa/scenario.hpp"
