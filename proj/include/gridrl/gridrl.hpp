#pragma once

/** Umbrella header: the whole library in one include. */

#include "gridrl/characteristics.hpp"
#include "gridrl/convergence_cases.hpp"
#include "gridrl/core.hpp"
#include "gridrl/csv.hpp"
#include "gridrl/integrate.hpp"
#include "gridrl/model.hpp"
#include "gridrl/noise.hpp"
#include "gridrl/parallel.hpp"
#include "gridrl/quadrature.hpp"
#include "gridrl/rng.hpp"
#include "gridrl/scenarios.hpp"
#include "gridrl/sde.hpp"
#include "gridrl/selfcheck.hpp"
#include "gridrl/td.hpp"
