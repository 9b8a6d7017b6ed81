#pragma once

#include "medfb/divergence.hpp"
#include "medfb/policy_set.hpp"
#include "medfb/capacity.hpp"
#include "medfb/learners.hpp"
#include "medfb/environments.hpp"
#include "medfb/rng.hpp"
#include "medfb/config.hpp"
#include "medfb/harness.hpp"
