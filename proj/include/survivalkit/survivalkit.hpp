#pragma once

#include "survivalkit/core_math.hpp"
#include "survivalkit/coxph.hpp"
#include "survivalkit/dataset.hpp"
#include "survivalkit/diagnostics.hpp"
#include "survivalkit/errors.hpp"
#include "survivalkit/formula.hpp"
#include "survivalkit/gof.hpp"
#include "survivalkit/linalg.hpp"
#include "survivalkit/nonparam.hpp"
#include "survivalkit/parametric.hpp"
#include "survivalkit/report.hpp"
#include "survivalkit/rng.hpp"
#include "survivalkit/svg.hpp"
#include "survivalkit/version.hpp"
