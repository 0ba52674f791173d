#include "rcr/model.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>
#include <string>

namespace rcr {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

ModelConfig::ModelConfig(int J, int N, int K, double u, double v,
                         double sigma2)
    : J_(J), N_(N), K_(K), u_(u), v_(v), sigma2_(sigma2) {
  require(J >= 2, fmt::format("J must be at least 2, got {}", J));
  require(N >= J, fmt::format("N must be at least J={}, got {}", J, N));
  require(K >= 1, fmt::format("K must be at least 1, got {}", K));
  require(positive_finite(u), fmt::format("u must be positive, got {}", u));
  require(positive_finite(v), fmt::format("v must be positive, got {}", v));
  require(positive_finite(sigma2),
          fmt::format("sigma2 must be positive, got {}", sigma2));
}

ModelConfig ModelConfig::with_variances(double u, double v) const {
  return {J_, N_, K_, u, v, sigma2_};
}

ModelConfig ModelConfig::with_sigma2(double sigma2) const {
  return {J_, N_, K_, u_, v_, sigma2};
}

ModelConfig ModelConfig::with_N(int N) const {
  return {J_, N, K_, u_, v_, sigma2_};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& doc) {
  require(doc.is_object(), "model configuration must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    require(key == "J" || key == "N" || key == "K" || key == "u" ||
                key == "v" || key == "sigma2",
            fmt::format("unknown configuration key '{}'", key));
  }
  auto integer = [&](const char* key) {
    require(doc.contains(key), fmt::format("missing key '{}'", key));
    const auto& x = doc.at(key);
    require(x.is_number_integer(),
            fmt::format("key '{}' must be an integer", key));
    return x.get<int>();
  };
  auto real = [&](const char* key) {
    require(doc.contains(key), fmt::format("missing key '{}'", key));
    const auto& x = doc.at(key);
    require(x.is_number(), fmt::format("key '{}' must be a number", key));
    return x.get<double>();
  };
  double sigma2 = doc.contains("sigma2") ? real("sigma2") : 1.0;
  return {integer("J"), integer("N"), integer("K"), real("u"), real("v"),
          sigma2};
}

nlohmann::json ModelConfig::to_json() const {
  return {{"J", J_}, {"N", N_}, {"K", K_},
          {"u", u_}, {"v", v_}, {"sigma2", sigma2_}};
}

ExactDesign::ExactDesign(int J, int n, int m) : J_(J), n_(n), m_(m) {
  require(J >= 2, fmt::format("J must be at least 2, got {}", J));
  require(n >= 1, fmt::format("treatment group size n must be >= 1, got {}", n));
  require(m >= 1, fmt::format("control group size m must be >= 1, got {}", m));
}

ExactDesign ExactDesign::from_treatment_size(const ModelConfig& config, int n) {
  return {config.J(), n, config.N() - (config.J() - 1) * n};
}

int ExactDesign::group_size(int j) const {
  require(j >= 1 && j <= J_,
          fmt::format("group index {} outside 1..{}", j, J_));
  return j < J_ ? n_ : m_;
}

int ExactDesign::cumulative(int j) const {
  require(j >= 0 && j <= J_,
          fmt::format("group index {} outside 0..{}", j, J_));
  return j < J_ ? n_ * j : N();
}

int ExactDesign::group_of(int i) const {
  require(i >= 0 && i < N(),
          fmt::format("individual index {} outside 0..{}", i, N() - 1));
  int j = i / n_ + 1;
  return j < J_ ? j : J_;
}

void ExactDesign::check_consistent(const ModelConfig& config) const {
  require(config.J() == J_,
          fmt::format("design has J={} but model has J={}", J_, config.J()));
  require(N() == config.N(),
          fmt::format("design sizes (J-1)*n+m = {} do not sum to N = {}", N(),
                      config.N()));
}

ApproximateDesign::ApproximateDesign(int J, double w) : J_(J), w_(w) {
  require(J >= 2, fmt::format("J must be at least 2, got {}", J));
  require(std::isfinite(w) && w > 0.0 && w < max_weight(J),
          fmt::format("weight {} outside the open interval (0, {})", w,
                      max_weight(J)));
}

double max_weight(int J) { return 1.0 / (J - 1); }

VectorXd regression_vector(int j, int J) {
  require(J >= 2, fmt::format("J must be at least 2, got {}", J));
  require(j >= 1 && j <= J,
          fmt::format("group index {} outside 1..{}", j, J));
  VectorXd f = VectorXd::Zero(J);
  f(0) = 1.0;
  if (j < J) f(j) = 1.0;
  return f;
}

MixedModelSystem build_system(const ModelConfig& config,
                              const ExactDesign& design) {
  design.check_consistent(config);
  const int J = config.J();
  const int N = config.N();
  const int K = config.K();

  MixedModelSystem sys;
  sys.X = MatrixXd::Zero(N * K, J);
  sys.Z = MatrixXd::Zero(N * K, N * J);
  for (int i = 0; i < N; ++i) {
    const VectorXd f = regression_vector(design.group_of(i), J);
    for (int k = 0; k < K; ++k) {
      sys.X.row(i * K + k) = f.transpose();
      sys.Z.block(i * K + k, i * J, 1, J) = f.transpose();
    }
  }

  VectorXd theta_var = VectorXd::Constant(J, config.v());
  theta_var(0) = config.u();
  sys.G = MatrixXd::Zero(N * J, N * J);
  for (int i = 0; i < N; ++i) {
    sys.G.block(i * J, i * J, J, J) =
        config.sigma2() * theta_var.asDiagonal().toDenseMatrix();
  }
  sys.R = config.sigma2() * MatrixXd::Identity(N * K, N * K);
  return sys;
}

ApproximateDesign weight_of(const ExactDesign& design, int N) {
  require(design.N() == N,
          fmt::format("design sizes sum to {} but N = {}", design.N(), N));
  return {design.J(), static_cast<double>(design.n()) / N};
}

}  // namespace rcr
