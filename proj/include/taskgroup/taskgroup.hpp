#pragma once

// Umbrella header for the task grouping library: synthetic multi-task
// training with lookahead transfer-gain collection, the exact grouping
// solver with its enumeration oracle, MILP export, the collection cost
// model, and the batch pipeline.

#include "taskgroup/brute_force.hpp"
#include "taskgroup/cost_model.hpp"
#include "taskgroup/evaluate.hpp"
#include "taskgroup/feasibility.hpp"
#include "taskgroup/gain_matrix.hpp"
#include "taskgroup/grouping.hpp"
#include "taskgroup/io.hpp"
#include "taskgroup/mip_export.hpp"
#include "taskgroup/pipeline.hpp"
#include "taskgroup/random.hpp"
#include "taskgroup/simulation.hpp"
#include "taskgroup/solver.hpp"
#include "taskgroup/synthetic_task.hpp"
#include "taskgroup/verify.hpp"
