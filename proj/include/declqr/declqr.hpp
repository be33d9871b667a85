#pragma once

// Decentralized LQR synthesis and robustness certification for plants
// structured over directed acyclic graphs.

#include "declqr/analysis.hpp"
#include "declqr/graph.hpp"
#include "declqr/linalg.hpp"
#include "declqr/lqr.hpp"
#include "declqr/plant.hpp"
#include "declqr/robustness.hpp"
#include "declqr/scenario.hpp"
#include "declqr/state_space.hpp"
#include "declqr/sweep.hpp"
#include "declqr/synthesis.hpp"
