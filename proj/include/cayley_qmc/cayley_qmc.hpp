#pragma once

#include "cayley_qmc/errors.hpp"
#include "cayley_qmc/tree.hpp"
#include "cayley_qmc/linalg.hpp"
#include "cayley_qmc/model.hpp"
#include "cayley_qmc/boundary.hpp"
#include "cayley_qmc/state.hpp"
