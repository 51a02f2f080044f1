#pragma once

#include "gsat/core/matrix.hpp"
#include "gsat/core/optim.hpp"
#include "gsat/core/rng.hpp"
#include "gsat/core/tape.hpp"
#include "gsat/graph/generate.hpp"
#include "gsat/graph/graph.hpp"
#include "gsat/graph/io.hpp"
#include "gsat/attention/gat.hpp"
#include "gsat/attention/spiking.hpp"
#include "gsat/model/config.hpp"
#include "gsat/model/network.hpp"
#include "gsat/model/trainer.hpp"
#include "gsat/experiments/attack.hpp"
#include "gsat/experiments/flops.hpp"
#include "gsat/experiments/sweep.hpp"
