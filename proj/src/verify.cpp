#include "rcr/verify.hpp"

#include "rcr/blue_blup.hpp"
#include "rcr/criteria.hpp"
#include "rcr/design_opt.hpp"
#include "rcr/mixed_oracle.hpp"
#include "rcr/moments.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <random>

namespace rcr {

namespace {

class Tracker {
 public:
  Tracker(std::string name, double tolerance) {
    result_.name = std::move(name);
    result_.tolerance = tolerance;
  }

  void record(double deviation, const std::function<std::string()>& where) {
    ++result_.cases;
    if (!std::isfinite(deviation)) deviation = std::numeric_limits<double>::infinity();
    result_.worst = std::max(result_.worst, deviation);
    if (deviation > result_.tolerance && result_.failure.empty())
      result_.failure = fmt::format("{} (deviation {:.3g})", where(), deviation);
  }

  void fail(const std::string& what) {
    ++result_.cases;
    if (result_.failure.empty()) result_.failure = what;
  }

  CheckResult result() const { return result_; }

 private:
  CheckResult result_;
};

std::string describe(const ModelConfig& c, const ExactDesign& d) {
  return fmt::format("J={} n={} m={} K={} u={} v={} sigma2={}", c.J(), d.n(),
                     d.m(), c.K(), c.u(), c.v(), c.sigma2());
}

}  // namespace

std::vector<CheckResult> run_verification(const VerifyGrid& grid) {
  Tracker estimators("BLUE/BLUP closed form vs Henderson solve", 1e-10);
  Tracker joint("Henderson two-step vs joint equations", 1e-10);
  Tracker cov("Cov(BLUE) closed form vs projected C11", 1e-10);
  Tracker mse("MSE(BLUP) Kronecker blocks vs projected C blocks", 1e-10);
  Tracker printed("explicit C blocks vs generic C blocks", 1e-10);
  Tracker two_group("J=2 H-block assembly vs Kronecker assembly", 1e-12);
  Tracker eig1("Cov(BLUE) closed-form spectrum vs eigensolver", 1e-9);
  Tracker eig2("J=2 MSE closed-form spectrum vs eigensolver", 1e-9);

  std::mt19937_64 rng(grid.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (int J : grid.J)
    for (int n : grid.n)
      for (int m : grid.m)
        for (int K : grid.K)
          for (double u : grid.u)
            for (double v : grid.v)
              for (double s2 : grid.sigma2) {
                const ExactDesign design(J, n, m);
                const ModelConfig config(J, design.N(), K, u, v, s2);
                auto where = [&] { return describe(config, design); };
                try {
                  MixedModelSystem sys = build_system(config, design);
                  for (int rep = 0; rep < grid.datasets; ++rep) {
                    VectorXd y(sys.X.rows());
                    for (auto& x : y) x = normal(rng);
                    sys.Y = y;
                    const HendersonSolution oracle = henderson_solve(sys);
                    const HendersonSolution stacked = henderson_joint_solve(sys);
                    const ObservationSet obs(design, K, y);
                    const PopulationEstimate est = blue(obs, config);
                    const IndividualPrediction pred = blup(obs, config);
                    const double data = y.cwiseAbs().maxCoeff();
                    estimators.record(
                        std::max(scaled_difference(stacked_fixed_effects(est),
                                                   oracle.beta_hat, data),
                                 scaled_difference(stacked_random_effects(est, pred),
                                                   oracle.gamma_hat, data)),
                        where);
                    joint.record(
                        std::max(scaled_difference(stacked.beta_hat, oracle.beta_hat, data),
                                 scaled_difference(stacked.gamma_hat, oracle.gamma_hat,
                                                   data)),
                        where);
                  }

                  const PartitionedMse generic = henderson_mse(sys);
                  const PartitionedMse closed = explicit_mse_blocks(config, design);
                  printed.record(scaled_difference(closed.assembled(), generic.assembled()),
                                 where);

                  const MomentMatrix c = cov_blue(config, n, m);
                  cov.record(scaled_difference(c.entries, project_cov_blue(generic).entries),
                             where);
                  const MomentMatrix b = mse_blup(config, design);
                  mse.record(scaled_difference(
                                 b.entries,
                                 project_mse_blup(generic, config.N(), J).entries),
                             where);

                  eig1.record(spectra_match(eig_cov_blue(config, n, m), numeric_eigs(c))
                                  ? spectrum_distance(eig_cov_blue(config, n, m),
                                                      numeric_eigs(c))
                                  : std::numeric_limits<double>::infinity(),
                              where);

                  if (J == 2) {
                    two_group.record(
                        scaled_difference(mse_blocks_two_group(config, design).assembled(),
                                          b.entries),
                        where);
                    const EigenSpectrum closed_form = eig_mse_two_group(config, design);
                    const EigenSpectrum numeric = numeric_eigs(b);
                    eig2.record(spectra_match(closed_form, numeric)
                                    ? spectrum_distance(closed_form, numeric)
                                    : std::numeric_limits<double>::infinity(),
                                where);
                  }
                } catch (const std::exception& e) {
                  estimators.fail(fmt::format("{}: {}", where(), e.what()));
                }
              }

  Tracker weights("closed-form optimal weights vs golden-section search", 1e-6);
  for (int J : {2, 3, 4})
    for (int N : {20, 100})
      for (int K : {1, 10})
        for (double u : {0.5, 1.0, 2.0})
          for (double v : {0.5, 1.0, 2.0}) {
            const ModelConfig config(J, N, K, u, v);
            for (Criterion crit : {Criterion::A, Criterion::D, Criterion::E})
              for (Target target : {Target::Estimation, Target::Prediction}) {
                const CriterionSpec spec{crit, target};
                if (target == Target::Prediction && (J != 2 || crit == Criterion::A))
                  continue;
                const double closed = closed_form_weight(config, spec);
                const double numeric = minimize_criterion(config, spec).w_star;
                weights.record(std::abs(closed - numeric), [&] {
                  return fmt::format("{} J={} N={} K={} u={} v={}", spec.name(), J, N,
                                     K, u, v);
                });
              }
          }

  return {estimators.result(), joint.result(),  cov.result(),
          mse.result(),        printed.result(), two_group.result(),
          eig1.result(),       eig2.result(),    weights.result()};
}

}  // namespace rcr
