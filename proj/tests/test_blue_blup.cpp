#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rcr/blue_blup.hpp"

#include <random>
#include <sstream>
#include <stdexcept>

using namespace rcr;

namespace {

// Plain GLS/BLUP from the mixed model matrices, written out directly.
struct Gls {
  VectorXd beta;
  VectorXd gamma;
};

Gls gls(const MixedModelSystem& s, const VectorXd& y) {
  const MatrixXd V = s.Z * s.G * s.Z.transpose() + s.R;
  const MatrixXd Vi = V.inverse();
  const MatrixXd XtVi = s.X.transpose() * Vi;
  Gls out;
  out.beta = (XtVi * s.X).inverse() * (XtVi * y);
  out.gamma = s.G * s.Z.transpose() * Vi * (y - s.X * out.beta);
  return out;
}

}  // namespace

TEST_CASE("group means") {
  {
    const ObservationSet obs(ExactDesign(2, 1, 1), 2, Eigen::Vector4d(3, 5, 1, 1));
    const GroupMeans g = group_means(obs);
    CHECK(g.group(0) == doctest::Approx(4));
    CHECK(g.group(1) == doctest::Approx(1));
    CHECK(g.individual(0) == doctest::Approx(4));
  }
  {
    const ObservationSet obs(ExactDesign(2, 2, 1), 1, Eigen::Vector3d(4, 2, 1));
    const GroupMeans g = group_means(obs);
    CHECK(g.group(0) == doctest::Approx(3));
    CHECK(g.group(1) == doctest::Approx(1));
  }
  {
    const ObservationSet obs(ExactDesign(3, 2, 2), 3, VectorXd::Constant(18, 2.5));
    const GroupMeans g = group_means(obs);
    CHECK(g.group.isApproxToConstant(2.5));
    CHECK(g.individual.isApproxToConstant(2.5));
  }
}

TEST_CASE("population estimates") {
  const ModelConfig c2(2, 2, 1, 1, 1);
  const ObservationSet obs(ExactDesign(2, 1, 1), 1, Eigen::Vector2d(3, 1));
  const PopulationEstimate e = blue(obs, c2);
  CHECK(e.mu_hat == doctest::Approx(1));
  CHECK(e.psi0_hat(0) == doctest::Approx(2));

  // J=3 with group means (5, 4, 2)
  const ModelConfig c3(3, 3, 1, 1, 1);
  const ObservationSet obs3(ExactDesign(3, 1, 1), 1, Eigen::Vector3d(5, 4, 2));
  const PopulationEstimate e3 = blue(obs3, c3);
  CHECK(e3.mu_hat == doctest::Approx(2));
  CHECK(e3.psi0_hat(0) == doctest::Approx(3));
  CHECK(e3.psi0_hat(1) == doctest::Approx(2));
}

TEST_CASE("individual predictions, worked example") {
  const ModelConfig c(2, 3, 1, 1, 1);
  const ObservationSet obs(ExactDesign(2, 2, 1), 1, Eigen::Vector3d(4, 2, 1));
  const IndividualPrediction p = blup(obs, c);
  CHECK(p.alpha_hat(0, 0) == doctest::Approx(7.0 / 3.0).epsilon(1e-12));
  CHECK(p.alpha_hat(1, 0) == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
  CHECK(p.alpha_hat(2, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(p.mu_i_hat(0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(p.mu_i_hat(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(p.mu_i_hat(2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant data predicts no deviations") {
  const ModelConfig c(3, 7, 2, 0.8, 1.7);
  const ObservationSet obs(ExactDesign(3, 2, 3), 2, VectorXd::Constant(14, -1.25));
  const IndividualPrediction p = blup(obs, c);
  CHECK(p.mu_i_hat.isApproxToConstant(-1.25));
  CHECK(p.alpha_hat.cwiseAbs().maxCoeff() < 1e-12);
  const PopulationEstimate e = blue(obs, c);
  CHECK(e.mu_hat == doctest::Approx(-1.25));
  CHECK(e.psi0_hat.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("huge intercept variance removes control shrinkage") {
  const ModelConfig c(2, 4, 2, 1e8, 1);
  const VectorXd y = (VectorXd(8) << 1, 2, 3, 4, 7, 9, -2, 0).finished();
  const ObservationSet obs(ExactDesign(2, 2, 2), 2, y);
  const IndividualPrediction p = blup(obs, c);
  CHECK(p.mu_i_hat(2) == doctest::Approx(8.0).epsilon(1e-6));
  CHECK(p.mu_i_hat(3) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("closed forms agree with direct GLS on random data") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  for (int J : {2, 3, 4})
    for (int n : {1, 3})
      for (int m : {1, 2})
        for (int K : {1, 2}) {
          const ExactDesign d(J, n, m);
          const ModelConfig c(J, d.N(), K, 0.6, 1.4, 1.5);
          VectorXd y(d.N() * K);
          for (auto& x : y) x = 3 * z(rng);
          const ObservationSet obs(d, K, y);
          const Gls ref = gls(build_system(c, d), y);
          const PopulationEstimate e = blue(obs, c);
          const IndividualPrediction p = blup(obs, c);
          const double scale = y.cwiseAbs().maxCoeff();
          CAPTURE(J);
          CAPTURE(n);
          CAPTURE(m);
          CAPTURE(K);
          CHECK((stacked_fixed_effects(e) - ref.beta).cwiseAbs().maxCoeff() / scale <
                1e-10);
          CHECK((stacked_random_effects(e, p) - ref.gamma).cwiseAbs().maxCoeff() /
                    scale <
                1e-10);
          // the BLUP averages back: mean over control individuals of mu_i is mu_hat
          double ctrl = 0;
          for (int i = (J - 1) * n; i < d.N(); ++i) ctrl += p.mu_i_hat(i);
          CHECK(ctrl / m == doctest::Approx(e.mu_hat).epsilon(1e-10));
          CHECK(stacked_treatment_effects(p).size() == d.N() * (J - 1));
        }
}

TEST_CASE("CSV input") {
  std::istringstream in(
      "group,individual,replicate,value\n"
      "1,10,1,4\n"
      "1,11,1,2\n"
      "2,12,1,1\n");
  const ObservationSet obs = ObservationSet::read_csv(in);
  CHECK(obs.design().J() == 2);
  CHECK(obs.design().n() == 2);
  CHECK(obs.design().m() == 1);
  CHECK(obs.K() == 1);
  CHECK(obs.labels() == std::vector<int>{10, 11, 12});
  const IndividualPrediction p = blup(obs, ModelConfig(2, 3, 1, 1, 1));
  CHECK(p.alpha_hat(0, 0) == doctest::Approx(7.0 / 3.0));

  std::ostringstream out;
  write_predictions_csv(out, obs, p);
  CHECK(out.str().rfind("individual,group,mu_hat,alpha_1\n", 0) == 0);
  CHECK(out.str().find("\n10,1,") != std::string::npos);
}

TEST_CASE("CSV and record errors") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return ObservationSet::read_csv(in);
  };
  CHECK_THROWS_AS(parse(""), std::invalid_argument);
  CHECK_THROWS_AS(parse("g,i,r,v\n1,1,1,1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("group,individual,replicate,value\n1,1,1,abc\n2,2,1,1\n"),
                  std::invalid_argument);
  // missing replicate
  CHECK_THROWS_AS(parse("group,individual,replicate,value\n1,1,1,1\n1,1,2,1\n2,2,1,1\n"),
                  std::invalid_argument);
  // same individual in two groups
  CHECK_THROWS_AS(parse("group,individual,replicate,value\n1,1,1,1\n2,1,1,1\n"),
                  std::invalid_argument);
  // unequal treatment group sizes
  CHECK_THROWS_AS(ObservationSet::from_records(
                      3, {{1, 1, 1, 0}, {1, 2, 1, 0}, {2, 3, 1, 0}, {3, 4, 1, 0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(ObservationSet(ExactDesign(2, 1, 1), 2, Eigen::Vector3d(1, 2, 3)),
                  std::invalid_argument);
}
