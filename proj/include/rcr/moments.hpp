#pragma once

#include "rcr/model.hpp"

#include <vector>

namespace rcr {

enum class MomentKind { CovBlue, MseBlup, Empirical };

/// Dense symmetric second-moment matrix of an estimator or predictor.
struct MomentMatrix {
  MatrixXd entries;
  MomentKind kind;

  Eigen::Index dim() const { return entries.rows(); }
  double trace() const { return entries.trace(); }
};

struct EigenPair {
  double value;
  int multiplicity;
};

/// Eigenvalues with algebraic multiplicities, sorted descending.
class EigenSpectrum {
 public:
  EigenSpectrum() = default;
  /// Drops zero-multiplicity entries and sorts descending.
  explicit EigenSpectrum(std::vector<EigenPair> pairs);

  const std::vector<EigenPair>& pairs() const { return pairs_; }
  int dimension() const;
  double max() const;
  double sum() const;
  double log_det() const;
  /// All eigenvalues repeated by multiplicity, descending.
  std::vector<double> expanded() const;

  /// Merges neighbours whose relative gap is below `gap`.
  EigenSpectrum clustered(double gap = 1e-7) const;

 private:
  std::vector<EigenPair> pairs_;
};

/// Multiset comparison: same dimension, same multiplicity groups after
/// clustering, eigenvalues equal within rel_tol * max|lambda|.
bool spectra_match(const EigenSpectrum& a, const EigenSpectrum& b,
                   double rel_tol = 1e-9);

/// Largest elementwise deviation of two expanded spectra, relative to the
/// spectral radius.
double spectrum_distance(const EigenSpectrum& a, const EigenSpectrum& b);

/// Cov of the BLUE of (alpha_1..alpha_{J-1}). n and m may be fractional but
/// must satisfy (J-1)n + m = N.
MomentMatrix cov_blue(const ModelConfig& config, double n, double m);

/// MSE matrix of the BLUP of all individual treatment effects, assembled from
/// the B1 + B2 + B2' + B3 Kronecker blocks. Dimension N(J-1).
MomentMatrix mse_blup(const ModelConfig& config, const ExactDesign& design);

struct TwoGroupMseBlocks {
  MatrixXd H11;  // n x n
  MatrixXd H12;  // n x m
  MatrixXd H22;  // m x m

  MatrixXd assembled() const;
};

/// Closed-form partition of the prediction MSE for one treatment group.
TwoGroupMseBlocks mse_blocks_two_group(const ModelConfig& config,
                                       const ExactDesign& design);

EigenSpectrum eig_cov_blue(const ModelConfig& config, double n, double m);

/// Closed-form spectrum of the prediction MSE for J = 2.
EigenSpectrum eig_mse_two_group(const ModelConfig& config,
                                const ExactDesign& design);

/// s_w of the two-group prediction spectrum.
double two_group_discriminant(const ModelConfig& config, double w);

/// s_{n,m} = N^2 s_w, integer-size form of the discriminant.
double two_group_discriminant_sizes(const ModelConfig& config, double n,
                                    double m);

}  // namespace rcr
