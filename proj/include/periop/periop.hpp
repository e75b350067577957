#pragma once

#include "periop/bootstrap.hpp"
#include "periop/cohort.hpp"
#include "periop/compare.hpp"
#include "periop/csv.hpp"
#include "periop/encoding.hpp"
#include "periop/error.hpp"
#include "periop/forest.hpp"
#include "periop/grid_search.hpp"
#include "periop/log.hpp"
#include "periop/matrix.hpp"
#include "periop/metrics.hpp"
#include "periop/nri.hpp"
#include "periop/numeric.hpp"
#include "periop/parallel.hpp"
#include "periop/pipeline.hpp"
#include "periop/rng.hpp"
#include "periop/synthetic.hpp"
#include "periop/timeseries.hpp"
#include "periop/transformer.hpp"
#include "periop/wilcoxon.hpp"
