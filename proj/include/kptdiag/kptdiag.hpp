#pragma once

// Umbrella header: the whole diagnosis toolkit.

#include "kptdiag/types.hpp"
#include "kptdiag/geometry.hpp"
#include "kptdiag/similarity.hpp"
#include "kptdiag/io.hpp"
#include "kptdiag/parallel.hpp"
#include "kptdiag/matching.hpp"
#include "kptdiag/taxonomy.hpp"
#include "kptdiag/correction.hpp"
#include "kptdiag/scoring.hpp"
#include "kptdiag/background.hpp"
#include "kptdiag/benchmarks.hpp"
#include "kptdiag/fixtures.hpp"
#include "kptdiag/svg.hpp"
#include "kptdiag/report.hpp"
