#pragma once

// Umbrella header for the numerical library. config.hpp and analysis.hpp
// additionally need nlohmann_json and are included separately.

#include "hadcomp/amplitudes.hpp"
#include "hadcomp/compositeness.hpp"
#include "hadcomp/core.hpp"
#include "hadcomp/error.hpp"
#include "hadcomp/linalg.hpp"
#include "hadcomp/loopfn.hpp"
#include "hadcomp/lseq.hpp"
#include "hadcomp/poles.hpp"
#include "hadcomp/quadrature.hpp"
#include "hadcomp/saturation.hpp"
