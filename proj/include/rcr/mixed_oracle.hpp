#pragma once

#include "rcr/model.hpp"
#include "rcr/moments.hpp"

#include <cstdint>

namespace rcr {

/// Generic linear mixed model machinery, independent of the closed forms.
/// Every routine here works from X, Z, G, R only.

struct HendersonSolution {
  VectorXd beta_hat;   // length J
  VectorXd gamma_hat;  // length NJ
};

/// Cov((beta_hat, gamma_hat - gamma)) partitioned as [[C11, C12], [C12', C22]].
struct PartitionedMse {
  MatrixXd C11;  // J x J
  MatrixXd C12;  // J x NJ
  MatrixXd C22;  // NJ x NJ

  MatrixXd assembled() const;
};

/// beta_hat = (X'V^-1 X)^-1 X'V^-1 Y and gamma_hat = G Z' V^-1 (Y - X beta_hat)
/// with V = Z G Z' + R. Throws std::runtime_error when X is rank deficient or
/// a factorisation is ill-conditioned (reciprocal condition below 1e-12).
HendersonSolution henderson_solve(const MixedModelSystem& system);

/// Direct solve of the stacked mixed model equations.
HendersonSolution henderson_joint_solve(const MixedModelSystem& system);

/// C blocks from the generic matrix expressions.
PartitionedMse henderson_mse(const MixedModelSystem& system);

/// C blocks from the explicit closed forms for this model.
PartitionedMse explicit_mse_blocks(const ModelConfig& config,
                                   const ExactDesign& design);

/// (0 | I) C11 (0 | I)', the covariance of the mean treatment effect BLUE.
MomentMatrix project_cov_blue(const PartitionedMse& mse);

/// B1 + B2 + B2' + B3 obtained by projecting the C blocks onto the
/// individual treatment effects.
MomentMatrix project_mse_blup(const PartitionedMse& mse, int N, int J);

/// Self-adjoint eigensolver; multiplicities by clustering at relative gap
/// 1e-7. Throws std::invalid_argument for non-symmetric input.
EigenSpectrum numeric_eigs(const MatrixXd& m);
EigenSpectrum numeric_eigs(const MomentMatrix& m);

struct SimulationResult {
  MomentMatrix empirical;  // mean of (Psi_hat - Psi)(Psi_hat - Psi)'
  VectorXd mean_error;     // mean of Psi_hat - Psi
  VectorXd standard_error; // per component
  int reps;
};

/// Monte Carlo estimate of the BLUP MSE matrix. Population parameters are
/// mu = 1, alpha_j = j; effects and errors are Gaussian. Replicates are drawn
/// in fixed-size batches, each from its own generator seeded by
/// (seed, batch index), so the result depends only on seed and reps.
SimulationResult simulate_mse(const ModelConfig& config,
                              const ExactDesign& design, int reps,
                              std::uint64_t seed, unsigned threads = 1);

/// Relative Frobenius distance ||a - b|| / ||b||.
double relative_frobenius(const MatrixXd& a, const MatrixXd& b);

}  // namespace rcr
