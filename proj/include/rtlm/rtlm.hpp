#pragma once

#include "cli.hpp"
#include "error.hpp"
#include "estimator.hpp"
#include "hash.hpp"
#include "metrics.hpp"
#include "model_profile.hpp"
#include "pipeline.hpp"
#include "profile.hpp"
#include "rng.hpp"
#include "sched.hpp"
#include "sim.hpp"
#include "synth.hpp"
#include "textfeat.hpp"
#include "workload.hpp"
