#pragma once

// Umbrella header for the chart-level integrability toolkit.

#include "ncint/cli.hpp"
#include "ncint/errors.hpp"
#include "ncint/expr.hpp"
#include "ncint/flows.hpp"
#include "ncint/integrability.hpp"
#include "ncint/lie_poisson.hpp"
#include "ncint/parse.hpp"
#include "ncint/poisson.hpp"
#include "ncint/report.hpp"
#include "ncint/systems.hpp"
