#include "rcr/mixed_oracle.hpp"

#include "rcr/blue_blup.hpp"

#include <fmt/format.h>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

namespace rcr {

using Eigen::kroneckerProduct;

namespace {

constexpr double kMinReciprocalCondition = 1e-12;
constexpr int kBatchSize = 1000;

Eigen::LLT<MatrixXd> spd_factor(const MatrixXd& m, const std::string& what) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(
        fmt::format("{} is not symmetric positive definite", what));
  if (llt.rcond() < kMinReciprocalCondition)
    throw std::runtime_error(fmt::format(
        "{} is ill-conditioned (reciprocal condition {:.3g})", what,
        llt.rcond()));
  return llt;
}

MatrixXd spd_inverse(const MatrixXd& m, const std::string& what) {
  return spd_factor(m, what).solve(MatrixXd::Identity(m.rows(), m.cols()));
}

const VectorXd& observations(const MixedModelSystem& sys) {
  if (!sys.Y) throw std::invalid_argument("mixed model system has no observations");
  if (sys.Y->size() != sys.X.rows())
    throw std::invalid_argument(fmt::format(
        "observation vector has length {}, expected {}", sys.Y->size(),
        sys.X.rows()));
  return *sys.Y;
}

void check_rank(const MatrixXd& X) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
  if (qr.rank() < X.cols())
    throw std::runtime_error(fmt::format(
        "fixed-effects design matrix has rank {} < {} columns", qr.rank(),
        X.cols()));
}

// (0 | I_{J-1}), picks the treatment effects out of (mu, alpha_1..).
MatrixXd selector(int J) {
  MatrixXd s = MatrixXd::Zero(J - 1, J);
  s.rightCols(J - 1).setIdentity();
  return s;
}

}  // namespace

MatrixXd PartitionedMse::assembled() const {
  const auto p = C11.rows();
  const auto q = C22.rows();
  MatrixXd out(p + q, p + q);
  out << C11, C12, C12.transpose(), C22;
  return out;
}

HendersonSolution henderson_solve(const MixedModelSystem& sys) {
  const VectorXd& Y = observations(sys);
  check_rank(sys.X);
  const MatrixXd V = sys.Z * sys.G * sys.Z.transpose() + sys.R;
  const auto V_llt = spd_factor(V, "marginal covariance ZGZ' + R");
  const MatrixXd Vinv_X = V_llt.solve(sys.X);
  const VectorXd Vinv_Y = V_llt.solve(Y);
  const MatrixXd info = sys.X.transpose() * Vinv_X;
  const VectorXd beta =
      spd_factor(info, "X'V^-1X").solve(sys.X.transpose() * Vinv_Y);
  const VectorXd gamma =
      sys.G * sys.Z.transpose() * V_llt.solve(Y - sys.X * beta);
  return {beta, gamma};
}

HendersonSolution henderson_joint_solve(const MixedModelSystem& sys) {
  const VectorXd& Y = observations(sys);
  check_rank(sys.X);
  const MatrixXd Rinv = spd_inverse(sys.R, "R");
  const MatrixXd Ginv = spd_inverse(sys.G, "G");
  const auto p = sys.X.cols();
  const auto q = sys.Z.cols();
  MatrixXd lhs(p + q, p + q);
  lhs << sys.X.transpose() * Rinv * sys.X, sys.X.transpose() * Rinv * sys.Z,
      sys.Z.transpose() * Rinv * sys.X,
      sys.Z.transpose() * Rinv * sys.Z + Ginv;
  VectorXd rhs(p + q);
  rhs << sys.X.transpose() * Rinv * Y, sys.Z.transpose() * Rinv * Y;
  const VectorXd sol = spd_factor(lhs, "mixed model coefficient matrix").solve(rhs);
  return {sol.head(p), sol.tail(q)};
}

PartitionedMse henderson_mse(const MixedModelSystem& sys) {
  check_rank(sys.X);
  const MatrixXd Rinv = spd_inverse(sys.R, "R");
  const MatrixXd Ginv = spd_inverse(sys.G, "G");
  const MatrixXd V = sys.Z * sys.G * sys.Z.transpose() + sys.R;
  const auto V_llt = spd_factor(V, "marginal covariance ZGZ' + R");

  const MatrixXd XtRinvZ = sys.X.transpose() * Rinv * sys.Z;
  const MatrixXd ZtRinvZ = sys.Z.transpose() * Rinv * sys.Z;
  const MatrixXd XtRinvX = sys.X.transpose() * Rinv * sys.X;

  PartitionedMse out;
  out.C11 = spd_inverse(sys.X.transpose() * V_llt.solve(sys.X), "X'V^-1X");
  out.C22 = spd_inverse(
      ZtRinvZ + Ginv -
          XtRinvZ.transpose() * spd_factor(XtRinvX, "X'R^-1X").solve(XtRinvZ),
      "random-effects Schur complement");
  out.C12 = -out.C11 * XtRinvZ * spd_inverse(ZtRinvZ + Ginv, "Z'R^-1Z + G^-1");
  return out;
}

PartitionedMse explicit_mse_blocks(const ModelConfig& config,
                                   const ExactDesign& design) {
  design.check_consistent(config);
  const int J = config.J();
  const int d = J - 1;
  const int n = design.n();
  const int m = design.m();
  const double K = config.K();
  const double u = config.u();
  const double v = config.v();
  const double s2 = config.sigma2();
  const double ctrl = config.control_factor();
  const double treat = config.treatment_factor();

  PartitionedMse out;

  MatrixXd c11(J, J);
  c11(0, 0) = 1.0;
  c11.block(0, 1, 1, d).setConstant(-1.0);
  c11.block(1, 0, d, 1).setConstant(-1.0);
  c11.block(1, 1, d, d) = MatrixXd::Ones(d, d);
  c11.block(1, 1, d, d).diagonal().array() += treat * m / (ctrl * n);
  out.C11 = s2 * ctrl / (K * m) * c11;

  VectorXd theta_var = VectorXd::Constant(J, v);
  theta_var(0) = u;
  const MatrixXd per_individual = theta_var.asDiagonal().toDenseMatrix();
  auto loading = [&](int j) {  // (u, v e_j) for treatment j, (u, 0) for control
    VectorXd x = VectorXd::Zero(J);
    x(0) = u;
    if (j < J) x(j) = v;
    return x;
  };
  auto unit = [&](int j) {  // (0, e_j)
    VectorXd x = VectorXd::Zero(J);
    x(j) = 1.0;
    return x;
  };
  auto centering = [](int size) {
    return MatrixXd(MatrixXd::Identity(size, size) -
                    MatrixXd::Constant(size, size, 1.0 / size));
  };

  const int treated = n * d;
  const int NJ = config.N() * J;
  out.C22 = MatrixXd::Zero(NJ, NJ);
  MatrixXd c221 = kroneckerProduct(MatrixXd::Identity(treated, treated),
                                   per_individual);
  for (int j = 1; j < J; ++j) {
    const VectorXd l = loading(j);
    c221.block((j - 1) * n * J, (j - 1) * n * J, n * J, n * J) -=
        K / treat * kroneckerProduct(centering(n), l * l.transpose()).eval();
  }
  const VectorXd l0 = loading(J);
  const MatrixXd c222 =
      kroneckerProduct(MatrixXd::Identity(m, m), per_individual).eval() -
      K / ctrl * kroneckerProduct(centering(m), l0 * l0.transpose()).eval();
  out.C22.topLeftCorner(treated * J, treated * J) = c221;
  out.C22.bottomRightCorner(m * J, m * J) = c222;
  out.C22 *= s2;

  out.C12 = MatrixXd::Zero(J, NJ);
  for (int j = 1; j < J; ++j) {
    out.C12.block(0, (j - 1) * n * J, J, n * J) = kroneckerProduct(
        MatrixXd::Constant(1, n, 1.0 / n), unit(j) * loading(j).transpose());
  }
  VectorXd contrast = VectorXd::Constant(J, -1.0);
  contrast(0) = 1.0;
  out.C12.rightCols(m * J) = kroneckerProduct(
      MatrixXd::Constant(1, m, 1.0 / m), contrast * l0.transpose());
  out.C12 *= -s2;
  return out;
}

MomentMatrix project_cov_blue(const PartitionedMse& mse) {
  const int J = static_cast<int>(mse.C11.rows());
  const MatrixXd S = selector(J);
  return {S * mse.C11 * S.transpose(), MomentKind::CovBlue};
}

MomentMatrix project_mse_blup(const PartitionedMse& mse, int N, int J) {
  const MatrixXd S = selector(J);
  const MatrixXd L1 = kroneckerProduct(MatrixXd::Ones(N, 1), S);
  const MatrixXd L2 = kroneckerProduct(MatrixXd::Identity(N, N), S);
  const MatrixXd B1 = L1 * mse.C11 * L1.transpose();
  const MatrixXd B2 = L1 * mse.C12 * L2.transpose();
  const MatrixXd B3 = L2 * mse.C22 * L2.transpose();
  return {B1 + B2 + B2.transpose() + B3, MomentKind::MseBlup};
}

EigenSpectrum numeric_eigs(const MatrixXd& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("eigenvalues need a square matrix");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("eigenvalues need a symmetric matrix");
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("symmetric eigensolver did not converge");
  std::vector<EigenPair> pairs;
  pairs.reserve(m.rows());
  for (Eigen::Index k = 0; k < m.rows(); ++k)
    pairs.push_back({solver.eigenvalues()(k), 1});
  return EigenSpectrum(std::move(pairs)).clustered(1e-7);
}

EigenSpectrum numeric_eigs(const MomentMatrix& m) { return numeric_eigs(m.entries); }

double relative_frobenius(const MatrixXd& a, const MatrixXd& b) {
  return (a - b).norm() / b.norm();
}

namespace {

struct BatchSums {
  VectorXd sum;
  MatrixXd outer;
};

BatchSums run_batch(const ModelConfig& config, const ExactDesign& design,
                    int count, std::uint64_t seed, std::uint64_t batch) {
  const int J = config.J();
  const int N = config.N();
  const int K = config.K();
  const int d = J - 1;
  const double sd_mu = std::sqrt(config.u() * config.sigma2());
  const double sd_alpha = std::sqrt(config.v() * config.sigma2());
  const double sd_eps = std::sqrt(config.sigma2());

  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(batch),
                    static_cast<std::uint32_t>(batch >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);

  BatchSums sums{VectorXd::Zero(N * d), MatrixXd::Zero(N * d, N * d)};
  VectorXd y(N * K);
  VectorXd psi(N * d);
  for (int r = 0; r < count; ++r) {
    for (int i = 0; i < N; ++i) {
      const int g = design.group_of(i);
      const double mu_i = 1.0 + sd_mu * normal(rng);
      for (int j = 1; j < J; ++j)
        psi(i * d + j - 1) = static_cast<double>(j) + sd_alpha * normal(rng);
      const double mean = mu_i + (g < J ? psi(i * d + g - 1) : 0.0);
      for (int k = 0; k < K; ++k) y(i * K + k) = mean + sd_eps * normal(rng);
    }
    const ObservationSet obs(design, K, y);
    const VectorXd err =
        stacked_treatment_effects(blup(obs, config)) - psi;
    sums.sum += err;
    sums.outer.selfadjointView<Eigen::Lower>().rankUpdate(err);
  }
  sums.outer = sums.outer.selfadjointView<Eigen::Lower>();
  return sums;
}

}  // namespace

SimulationResult simulate_mse(const ModelConfig& config,
                              const ExactDesign& design, int reps,
                              std::uint64_t seed, unsigned threads) {
  if (reps < 1)
    throw std::invalid_argument(
        fmt::format("number of replicates must be at least 1, got {}", reps));
  design.check_consistent(config);
  const int batches = (reps + kBatchSize - 1) / kBatchSize;
  std::vector<BatchSums> partial(batches);
  auto work = [&](int b) {
    const int count = std::min(kBatchSize, reps - b * kBatchSize);
    partial[b] = run_batch(config, design, count, seed, static_cast<std::uint64_t>(b));
  };

  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(batches));
  if (threads == 1) {
    for (int b = 0; b < batches; ++b) work(b);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (int b = static_cast<int>(t); b < batches; b += static_cast<int>(threads))
            work(b);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // Reduce in batch order so the result is independent of the thread count.
  VectorXd sum = partial.front().sum;
  MatrixXd outer = partial.front().outer;
  for (int b = 1; b < batches; ++b) {
    sum += partial[b].sum;
    outer += partial[b].outer;
  }
  const double R = reps;
  SimulationResult out{{outer / R, MomentKind::Empirical}, sum / R,
                       VectorXd::Zero(sum.size()), reps};
  if (reps > 1) {
    const VectorXd second = outer.diagonal() / R;
    const VectorXd var = ((second.array() - out.mean_error.array().square()) *
                          (R / (R - 1.0)))
                             .max(0.0);
    out.standard_error = (var.array() / R).sqrt();
  }
  return out;
}

}  // namespace rcr
