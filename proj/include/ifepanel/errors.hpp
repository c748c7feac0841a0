#pragma once

#include <stdexcept>
#include <string>

namespace ifepanel {

// Base class for all library failures so callers can catch one type.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct argument_error : error {
  using error::error;
};

// Outcome outside the support of the likelihood family.
struct support_error : error {
  using error::error;
};

// CSV / panel construction failures (unbalanced cells, duplicates, parse).
struct panel_error : error {
  using error::error;
};

struct convergence_error : error {
  using error::error;
};

// ||alpha|| or ||gamma|| collapsed below the identifiable scale.
struct degenerate_factor_error : error {
  using error::error;
};

// Singular beta block / generalized noncolinearity failure.
struct noncolinearity_error : error {
  using error::error;
};

// Incidental Hessian with more than one numerically-zero eigenvalue, or a
// non-positive-definite information matrix.
struct rank_error : error {
  using error::error;
};

}  // namespace ifepanel
