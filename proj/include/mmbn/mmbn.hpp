#pragma once

#include "mmbn/data.hpp"
#include "mmbn/catalog.hpp"
#include "mmbn/estimation.hpp"
#include "mmbn/coefficients.hpp"
#include "mmbn/lp.hpp"
#include "mmbn/milp.hpp"
#include "mmbn/solver.hpp"
#include "mmbn/classifier.hpp"
#include "mmbn/evaluation.hpp"
