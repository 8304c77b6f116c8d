#pragma once

// Umbrella header for the polyprotect library: subject-keyed polynomial
// window protection of real-vector templates, inversion-attack solvers,
// verification metrics and the key selection loop.

#include "polyprotect/attack.hpp"
#include "polyprotect/embedding.hpp"
#include "polyprotect/errors.hpp"
#include "polyprotect/keyselect.hpp"
#include "polyprotect/metrics.hpp"
#include "polyprotect/report.hpp"
#include "polyprotect/solvers.hpp"
#include "polyprotect/transform.hpp"
#include "polyprotect/version.hpp"
