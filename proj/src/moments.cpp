#include "rcr/moments.hpp"

#include <fmt/format.h>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rcr {

using Eigen::kroneckerProduct;

EigenSpectrum::EigenSpectrum(std::vector<EigenPair> pairs) {
  for (const auto& p : pairs) {
    if (p.multiplicity < 0)
      throw std::invalid_argument("negative eigenvalue multiplicity");
    if (p.multiplicity > 0) pairs_.push_back(p);
  }
  std::stable_sort(pairs_.begin(), pairs_.end(),
                   [](const EigenPair& a, const EigenPair& b) {
                     return a.value > b.value;
                   });
}

int EigenSpectrum::dimension() const {
  return std::accumulate(pairs_.begin(), pairs_.end(), 0,
                         [](int s, const EigenPair& p) { return s + p.multiplicity; });
}

double EigenSpectrum::max() const {
  if (pairs_.empty()) throw std::logic_error("empty spectrum");
  return pairs_.front().value;
}

double EigenSpectrum::sum() const {
  double s = 0.0;
  for (const auto& p : pairs_) s += p.multiplicity * p.value;
  return s;
}

double EigenSpectrum::log_det() const {
  double s = 0.0;
  for (const auto& p : pairs_) s += p.multiplicity * std::log(p.value);
  return s;
}

std::vector<double> EigenSpectrum::expanded() const {
  std::vector<double> out;
  out.reserve(dimension());
  for (const auto& p : pairs_) out.insert(out.end(), p.multiplicity, p.value);
  return out;
}

EigenSpectrum EigenSpectrum::clustered(double gap) const {
  if (pairs_.empty()) return *this;
  double scale = 0.0;
  for (const auto& p : pairs_) scale = std::max(scale, std::abs(p.value));
  std::vector<EigenPair> merged;
  // Cluster value is the multiplicity-weighted mean of its members.
  double weighted = 0.0;
  int count = 0;
  double last = pairs_.front().value;
  for (const auto& p : pairs_) {
    if (count > 0 && last - p.value > gap * scale) {
      merged.push_back({weighted / count, count});
      weighted = 0.0;
      count = 0;
    }
    weighted += p.value * p.multiplicity;
    count += p.multiplicity;
    last = p.value;
  }
  merged.push_back({weighted / count, count});
  return EigenSpectrum(std::move(merged));
}

double spectrum_distance(const EigenSpectrum& a, const EigenSpectrum& b) {
  const auto x = a.expanded();
  const auto y = b.expanded();
  if (x.size() != y.size()) return std::numeric_limits<double>::infinity();
  double scale = 0.0;
  for (double e : x) scale = std::max(scale, std::abs(e));
  for (double e : y) scale = std::max(scale, std::abs(e));
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    worst = std::max(worst, std::abs(x[i] - y[i]));
  return scale > 0.0 ? worst / scale : worst;
}

bool spectra_match(const EigenSpectrum& a, const EigenSpectrum& b,
                   double rel_tol) {
  if (spectrum_distance(a, b) > rel_tol) return false;
  const auto ca = a.clustered().pairs();
  const auto cb = b.clustered().pairs();
  if (ca.size() != cb.size()) return false;
  for (std::size_t i = 0; i < ca.size(); ++i)
    if (ca[i].multiplicity != cb[i].multiplicity) return false;
  return true;
}

namespace {

void check_sizes(const ModelConfig& config, double n, double m) {
  if (!(n > 0.0) || !(m > 0.0))
    throw std::invalid_argument(
        fmt::format("group sizes must be positive, got n={} m={}", n, m));
  const double total = (config.J() - 1) * n + m;
  if (std::abs(total - config.N()) > 1e-9 * config.N())
    throw std::invalid_argument(fmt::format(
        "group sizes (J-1)*n+m = {} do not sum to N = {}", total, config.N()));
}

MatrixXd unit_outer(int d, int j) {
  MatrixXd e = MatrixXd::Zero(d, d);
  e(j, j) = 1.0;
  return e;
}

MatrixXd centering(int n) {
  return MatrixXd::Identity(n, n) - MatrixXd::Constant(n, n, 1.0 / n);
}

}  // namespace

MomentMatrix cov_blue(const ModelConfig& config, double n, double m) {
  check_sizes(config, n, m);
  const int d = config.J() - 1;
  const double K = config.K();
  MatrixXd cov = (config.control_factor() / (K * m)) * MatrixXd::Ones(d, d);
  cov.diagonal().array() += config.treatment_factor() / (K * n);
  return {config.sigma2() * cov, MomentKind::CovBlue};
}

MomentMatrix mse_blup(const ModelConfig& config, const ExactDesign& design) {
  design.check_consistent(config);
  const int d = config.J() - 1;
  const int n = design.n();
  const int m = design.m();
  const int N = config.N();
  const double K = config.K();
  const double v = config.v();
  const double s2 = config.sigma2();

  const MatrixXd inner = cov_blue(config, n, m).entries / s2;
  const MatrixXd B1 = s2 * kroneckerProduct(MatrixXd::Ones(N, N), inner).eval();

  // tVec over treatment groups of (1/n) 1_n' (x) e_j e_j', then a zero block
  // for the control individuals.
  MatrixXd row = MatrixXd::Zero(d, N * d);
  for (int j = 0; j < d; ++j) {
    row.block(0, j * n * d, d, n * d) =
        kroneckerProduct(MatrixXd::Constant(1, n, 1.0 / n), unit_outer(d, j));
  }
  const MatrixXd B2 = -s2 * v * kroneckerProduct(MatrixXd::Ones(N, 1), row).eval();

  MatrixXd B3 = MatrixXd::Identity(N * d, N * d);
  const double shrink = K * v / config.treatment_factor();
  const MatrixXd C = centering(n);
  for (int j = 0; j < d; ++j) {
    B3.block(j * n * d, j * n * d, n * d, n * d) -=
        shrink * kroneckerProduct(C, unit_outer(d, j)).eval();
  }
  B3 *= s2 * v;

  MatrixXd mse = B1 + B2 + B2.transpose() + B3;
  return {std::move(mse), MomentKind::MseBlup};
}

MatrixXd TwoGroupMseBlocks::assembled() const {
  const auto n = H11.rows();
  const auto m = H22.rows();
  MatrixXd out(n + m, n + m);
  out << H11, H12, H12.transpose(), H22;
  return out;
}

TwoGroupMseBlocks mse_blocks_two_group(const ModelConfig& config,
                                       const ExactDesign& design) {
  if (config.J() != 2)
    throw std::domain_error(fmt::format(
        "two-group MSE blocks require J = 2, got J = {}", config.J()));
  design.check_consistent(config);
  const int n = design.n();
  const int m = design.m();
  const double N = config.N();
  const double K = config.K();
  const double v = config.v();
  const double s2 = config.sigma2();
  const double ctrl = config.control_factor();
  const double treat = config.treatment_factor();
  const double coupling = N / (K * n * m);

  TwoGroupMseBlocks h;
  h.H11 = s2 * ctrl *
          (coupling * MatrixXd::Ones(n, n) + (v / treat) * centering(n));
  h.H12 = s2 * ctrl * coupling * MatrixXd::Ones(n, m);
  h.H22 = s2 * ((treat / (K * n) + ctrl / (K * m)) * MatrixXd::Ones(m, m) +
                v * MatrixXd::Identity(m, m));
  return h;
}

EigenSpectrum eig_cov_blue(const ModelConfig& config, double n, double m) {
  check_sizes(config, n, m);
  const int J = config.J();
  const double K = config.K();
  const double s2 = config.sigma2();
  const double lambda1 =
      (s2 / K) * (config.control_factor() * (J - 1) / (config.N() - (J - 1) * n) +
                  config.treatment_factor() / n);
  const double lambda2 = s2 * config.treatment_factor() / (K * n);
  return EigenSpectrum({{lambda1, 1}, {lambda2, J - 2}});
}

double two_group_discriminant(const ModelConfig& config, double w) {
  const double K = config.K();
  const double v = config.v();
  const double c = config.control_factor();
  return K * K * (1 - w) * (1 - w) * v * v +
         2 * K * (1 - w) * (1 - 2 * w) * c * v + c * c;
}

double two_group_discriminant_sizes(const ModelConfig& config, double n,
                                    double m) {
  const double K = config.K();
  const double v = config.v();
  const double N = n + m;
  const double c = config.control_factor();
  return K * K * m * m * v * v + 2 * K * m * (m - n) * c * v + N * N * c * c;
}

EigenSpectrum eig_mse_two_group(const ModelConfig& config,
                                const ExactDesign& design) {
  if (config.J() != 2)
    throw std::domain_error(fmt::format(
        "two-group MSE spectrum requires J = 2, got J = {}", config.J()));
  design.check_consistent(config);
  const double K = config.K();
  const double v = config.v();
  const double s2 = config.sigma2();
  const double c = config.control_factor();
  const double w = static_cast<double>(design.n()) / config.N();

  const double lambda1 = s2 * v * c / config.treatment_factor();
  const double lambda2 = s2 * v;
  const double base = v / w + c / (K * w * (1 - w));
  const double root = std::sqrt(two_group_discriminant(config, w)) / (K * w * (1 - w));
  const double lambda3 = 0.5 * s2 * (base + root);
  const double lambda4 = 0.5 * s2 * (base - root);
  return EigenSpectrum({{lambda1, design.n() - 1},
                        {lambda2, design.m() - 1},
                        {lambda3, 1},
                        {lambda4, 1}});
}

}  // namespace rcr
