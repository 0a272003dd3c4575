#pragma once

#include "foreco/classical.hpp"
#include "foreco/covariance.hpp"
#include "foreco/error.hpp"
#include "foreco/heuristics.hpp"
#include "foreco/io.hpp"
#include "foreco/lcc.hpp"
#include "foreco/linalg.hpp"
#include "foreco/ls_reconciliation.hpp"
#include "foreco/ml/features.hpp"
#include "foreco/ml/learners.hpp"
#include "foreco/ml/reconciler.hpp"
#include "foreco/parallel.hpp"
#include "foreco/probabilistic.hpp"
#include "foreco/qp.hpp"
#include "foreco/series_tools.hpp"
#include "foreco/structures.hpp"
