#pragma once

#include "fedsac/core/error.hpp"
#include "fedsac/core/random.hpp"
#include "fedsac/core/csv.hpp"
#include "fedsac/rdn/network.hpp"
#include "fedsac/rdn/residuals.hpp"
#include "fedsac/opf/interior_point.hpp"
#include "fedsac/opf/opf.hpp"
#include "fedsac/ev/battery.hpp"
#include "fedsac/ev/habits.hpp"
#include "fedsac/env/prices.hpp"
#include "fedsac/env/rewards.hpp"
#include "fedsac/env/fleet_env.hpp"
#include "fedsac/nn/dense_net.hpp"
#include "fedsac/nn/adam.hpp"
#include "fedsac/nn/squashed_gaussian.hpp"
#include "fedsac/nn/checkpoint.hpp"
#include "fedsac/sac/replay_buffer.hpp"
#include "fedsac/sac/agent.hpp"
#include "fedsac/fed/federation.hpp"
#include "fedsac/bench/generators.hpp"
#include "fedsac/bench/config.hpp"
#include "fedsac/bench/experiment.hpp"
