#pragma once

#include "sgld/rng.hpp"
#include "sgld/core.hpp"
#include "sgld/model.hpp"
#include "sgld/schedule.hpp"
#include "sgld/law.hpp"
#include "sgld/sampler.hpp"
#include "sgld/metrics.hpp"
#include "sgld/config.hpp"
#include "sgld/experiments.hpp"
#include "sgld/verify.hpp"
#include "sgld/report.hpp"
