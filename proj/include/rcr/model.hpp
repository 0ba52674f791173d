#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <optional>

namespace rcr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Population constants of the multiple group random coefficient model.
///
/// Groups 1..J-1 are treatment groups and group J is the control group.
/// Each individual carries a random intercept with variance u*sigma2 and
/// J-1 random treatment effects with variance v*sigma2 each; every one of
/// the N individuals is observed K times with error variance sigma2.
class ModelConfig {
 public:
  ModelConfig(int J, int N, int K, double u, double v, double sigma2 = 1.0);

  int J() const { return J_; }
  int N() const { return N_; }
  int K() const { return K_; }
  double u() const { return u_; }
  double v() const { return v_; }
  double sigma2() const { return sigma2_; }

  /// Variance ratio v/u.
  double b() const { return v_ / u_; }
  /// v/(1+v), maps the treatment-effect variance onto (0,1).
  double rho() const { return v_ / (1.0 + v_); }

  /// K*u + 1, the control-group shrinkage denominator.
  double control_factor() const { return K_ * u_ + 1.0; }
  /// K*(u+v) + 1, the treatment-group shrinkage denominator.
  double treatment_factor() const { return K_ * (u_ + v_) + 1.0; }

  ModelConfig with_variances(double u, double v) const;
  ModelConfig with_sigma2(double sigma2) const;
  ModelConfig with_N(int N) const;

  /// Parses {"J","N","K","u","v","sigma2"}; sigma2 is optional, unknown keys
  /// are rejected.
  static ModelConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

 private:
  int J_;
  int N_;
  int K_;
  double u_;
  double v_;
  double sigma2_;
};

/// Integer group sizes: n individuals in each treatment group, m in control.
class ExactDesign {
 public:
  ExactDesign(int J, int n, int m);

  /// Design with n per treatment group and the remainder in control.
  static ExactDesign from_treatment_size(const ModelConfig& config, int n);

  int J() const { return J_; }
  int n() const { return n_; }
  int m() const { return m_; }
  int N() const { return (J_ - 1) * n_ + m_; }

  /// r_j for j = 1..J.
  int group_size(int j) const;
  /// N_j, the number of individuals in groups 1..j (N_0 = 0).
  int cumulative(int j) const;
  /// Group (1-based) of the individual with 0-based global index i.
  int group_of(int i) const;

  void check_consistent(const ModelConfig& config) const;

 private:
  int J_;
  int n_;
  int m_;
};

/// Continuous allocation: weight w per treatment group, 1-(J-1)w for control.
class ApproximateDesign {
 public:
  ApproximateDesign(int J, double w);

  int J() const { return J_; }
  double w() const { return w_; }
  double control_weight() const { return 1.0 - (J_ - 1) * w_; }

 private:
  int J_;
  double w_;
};

/// Largest admissible treatment weight, 1/(J-1).
double max_weight(int J);

/// Matrices of the observation model written as a linear mixed model
/// Y = X theta_0 + Z zeta + eps with Cov(zeta) = G and Cov(eps) = R.
struct MixedModelSystem {
  MatrixXd X;  // NK x J
  MatrixXd Z;  // NK x NJ
  MatrixXd G;  // NJ x NJ
  MatrixXd R;  // NK x NK
  std::optional<VectorXd> Y;
};

/// f(j) = (1, e_j) for treatment groups and (1, 0) for the control group.
VectorXd regression_vector(int j, int J);

MixedModelSystem build_system(const ModelConfig& config,
                              const ExactDesign& design);

ApproximateDesign weight_of(const ExactDesign& design, int N);

}  // namespace rcr
