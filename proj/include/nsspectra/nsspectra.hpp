#pragma once

#include "nsspectra/dense_linalg.hpp"
#include "nsspectra/errors.hpp"
#include "nsspectra/gaussian_matrix.hpp"
#include "nsspectra/matrix.hpp"
#include "nsspectra/mp_law.hpp"
#include "nsspectra/ns_orthogonalizer.hpp"
#include "nsspectra/scaling_experiments.hpp"
