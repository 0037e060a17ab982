#pragma once

#include "qmdp/evaluation.hpp"
#include "qmdp/exact_solver.hpp"
#include "qmdp/experiment.hpp"
#include "qmdp/heuristics.hpp"
#include "qmdp/inventory.hpp"
#include "qmdp/io.hpp"
#include "qmdp/mdp.hpp"
#include "qmdp/milp_export.hpp"
#include "qmdp/preprocess.hpp"
#include "qmdp/quantile.hpp"
#include "qmdp/random.hpp"
