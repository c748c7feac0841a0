#pragma once

#include <Eigen/Dense>

#include "ifepanel/errors.hpp"

namespace ifepanel {

// Panel-shaped matrices keep each unit's time series contiguous.
using PanelMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct SymPseudoInverse {
  MatrixXd pinv;
  VectorXd eigenvalues;   // ascending
  int n_null = 0;         // eigenvalues treated as zero
};

// Moore-Penrose pseudoinverse of a symmetric matrix by eigendecomposition;
// eigenvalues below rel_tol * max|eigenvalue| are treated as zero.
inline SymPseudoInverse sym_pseudo_inverse(const MatrixXd& m, double rel_tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw rank_error("eigendecomposition failed");
  const VectorXd& ev = es.eigenvalues();
  double cutoff = rel_tol * ev.cwiseAbs().maxCoeff();
  VectorXd inv_ev(ev.size());
  int n_null = 0;
  for (Eigen::Index j = 0; j < ev.size(); ++j) {
    if (std::abs(ev[j]) <= cutoff) {
      inv_ev[j] = 0.0;
      ++n_null;
    } else {
      inv_ev[j] = 1.0 / ev[j];
    }
  }
  SymPseudoInverse out;
  out.pinv = es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
  out.eigenvalues = ev;
  out.n_null = n_null;
  return out;
}

}  // namespace ifepanel
