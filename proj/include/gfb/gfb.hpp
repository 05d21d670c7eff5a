#pragma once

#include "gfb/errors.hpp"
#include "gfb/experiment.hpp"
#include "gfb/matrix_io.hpp"
#include "gfb/operators.hpp"
#include "gfb/pcp.hpp"
#include "gfb/random.hpp"
#include "gfb/rates.hpp"
#include "gfb/solver.hpp"
#include "gfb/space.hpp"
