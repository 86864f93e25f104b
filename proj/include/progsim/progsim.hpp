#pragma once

#include "progsim/action.hpp"
#include "progsim/casestudies.hpp"
#include "progsim/errors.hpp"
#include "progsim/graph.hpp"
#include "progsim/lts.hpp"
#include "progsim/lts_io.hpp"
#include "progsim/product.hpp"
#include "progsim/report.hpp"
#include "progsim/scheduler.hpp"
#include "progsim/scheduler_checks.hpp"
#include "progsim/simulation.hpp"
#include "progsim/trace_tree.hpp"
#include "progsim/transform.hpp"
