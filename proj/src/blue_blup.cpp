#include "rcr/blue_blup.hpp"

#include "rcr/csv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace rcr {

ObservationSet::ObservationSet(const ExactDesign& design, int K,
                               VectorXd values, std::vector<int> labels)
    : design_(design), K_(K), values_(std::move(values)),
      labels_(std::move(labels)) {
  if (K < 1)
    throw std::invalid_argument(fmt::format("K must be at least 1, got {}", K));
  if (values_.size() != static_cast<Eigen::Index>(design_.N()) * K)
    throw std::invalid_argument(fmt::format(
        "expected {} observations (N={} individuals x K={} replicates), got {}",
        design_.N() * K, design_.N(), K, values_.size()));
  if (labels_.empty()) {
    labels_.resize(design_.N());
    std::iota(labels_.begin(), labels_.end(), 1);
  } else if (static_cast<int>(labels_.size()) != design_.N()) {
    throw std::invalid_argument(
        fmt::format("expected {} individual labels, got {}", design_.N(),
                    labels_.size()));
  }
}

ObservationSet ObservationSet::from_records(
    int J, const std::vector<ObservationRecord>& rows) {
  if (J < 2)
    throw std::invalid_argument(fmt::format("J must be at least 2, got {}", J));
  // group -> individual -> replicate -> value
  std::vector<std::map<int, std::map<int, double>>> groups(J);
  std::map<int, int> owner;
  for (const auto& row : rows) {
    if (row.group < 1 || row.group > J)
      throw std::invalid_argument(
          fmt::format("group {} outside 1..{}", row.group, J));
    auto [it, fresh] = owner.emplace(row.individual, row.group);
    if (!fresh && it->second != row.group)
      throw std::invalid_argument(fmt::format(
          "individual {} appears in groups {} and {}", row.individual,
          it->second, row.group));
    auto& reps = groups[row.group - 1][row.individual];
    if (!reps.emplace(row.replicate, row.value).second)
      throw std::invalid_argument(
          fmt::format("duplicate replicate {} for individual {}",
                      row.replicate, row.individual));
  }

  int K = -1;
  for (int j = 0; j < J; ++j) {
    if (groups[j].empty())
      throw std::invalid_argument(
          fmt::format("group {} has no individuals", j + 1));
    for (const auto& [id, reps] : groups[j]) {
      if (K < 0) K = static_cast<int>(reps.size());
      if (static_cast<int>(reps.size()) != K ||
          reps.begin()->first != 1 || reps.rbegin()->first != K)
        throw std::invalid_argument(fmt::format(
            "individual {} does not have exactly the replicates 1..{}", id, K));
    }
  }
  const int n = static_cast<int>(groups[0].size());
  for (int j = 1; j < J - 1; ++j) {
    if (static_cast<int>(groups[j].size()) != n)
      throw std::invalid_argument(fmt::format(
          "treatment group {} has {} individuals but group 1 has {}", j + 1,
          groups[j].size(), n));
  }
  ExactDesign design(J, n, static_cast<int>(groups[J - 1].size()));

  VectorXd values(design.N() * K);
  std::vector<int> labels;
  labels.reserve(design.N());
  Eigen::Index pos = 0;
  for (const auto& group : groups) {
    for (const auto& [id, reps] : group) {
      labels.push_back(id);
      for (const auto& [rep, value] : reps) values(pos++) = value;
    }
  }
  return {design, K, std::move(values), std::move(labels)};
}

ObservationSet ObservationSet::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("observation CSV is empty");
  const auto header = csv::split_line(line);
  const std::vector<std::string> expected{"group", "individual", "replicate",
                                          "value"};
  if (header != expected)
    throw std::invalid_argument(
        "observation CSV header must be 'group,individual,replicate,value'");

  std::vector<ObservationRecord> rows;
  int J = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = csv::split_line(line);
    if (fields.size() != 4)
      throw std::invalid_argument(
          fmt::format("line {}: expected 4 fields, got {}", line_no,
                      fields.size()));
    ObservationRecord rec{csv::parse_int(fields[0], "group"),
                          csv::parse_int(fields[1], "individual"),
                          csv::parse_int(fields[2], "replicate"),
                          csv::parse_double(fields[3], "value")};
    J = std::max(J, rec.group);
    rows.push_back(rec);
  }
  return from_records(J, rows);
}

GroupMeans group_means(const ObservationSet& obs) {
  const auto& design = obs.design();
  const int J = design.J();
  const int N = obs.N();
  const int K = obs.K();

  GroupMeans means{VectorXd::Zero(J), VectorXd::Zero(N)};
  for (int i = 0; i < N; ++i) {
    means.individual(i) = obs.values().segment(i * K, K).mean();
  }
  for (int j = 1; j <= J; ++j) {
    const int first = design.cumulative(j - 1);
    means.group(j - 1) =
        means.individual.segment(first, design.group_size(j)).mean();
  }
  return means;
}

namespace {

void check_inputs(const ObservationSet& obs, const ModelConfig& config) {
  obs.design().check_consistent(config);
  if (obs.K() != config.K())
    throw std::invalid_argument(fmt::format(
        "observations have K={} replicates but model has K={}", obs.K(),
        config.K()));
}

}  // namespace

PopulationEstimate blue(const ObservationSet& obs, const ModelConfig& config) {
  check_inputs(obs, config);
  const int J = config.J();
  const GroupMeans means = group_means(obs);
  const double control = means.group(J - 1);
  return {control,
          means.group.head(J - 1).array() - control};
}

IndividualPrediction blup(const ObservationSet& obs, const ModelConfig& config) {
  check_inputs(obs, config);
  const auto& design = obs.design();
  const int J = config.J();
  const int N = config.N();
  const double K = config.K();
  const double u = config.u();
  const double v = config.v();
  const double ctrl = config.control_factor();
  const double treat = config.treatment_factor();

  const GroupMeans means = group_means(obs);
  const double control_mean = means.group(J - 1);

  IndividualPrediction pred{VectorXd(N), MatrixXd(N, J - 1)};
  for (int i = 0; i < N; ++i) {
    const int g = design.group_of(i);
    const double own = means.individual(i);
    // Individuals outside group j receive the population estimate for alpha_j.
    for (int j = 1; j < J; ++j)
      pred.alpha_hat(i, j - 1) = means.group(j - 1) - control_mean;

    if (g == J) {
      pred.mu_i_hat(i) = (K * u / ctrl) * own + (1.0 / ctrl) * control_mean;
    } else {
      const double group_mean = means.group(g - 1);
      pred.mu_i_hat(i) = (K * u / treat) * (own - group_mean) + control_mean;
      pred.alpha_hat(i, g - 1) = (K * v / treat) * (own - control_mean) +
                                 (ctrl / treat) * (group_mean - control_mean);
    }
  }
  return pred;
}

VectorXd stacked_fixed_effects(const PopulationEstimate& est) {
  VectorXd theta0(est.psi0_hat.size() + 1);
  theta0 << est.mu_hat, est.psi0_hat;
  return theta0;
}

VectorXd stacked_random_effects(const PopulationEstimate& est,
                                const IndividualPrediction& pred) {
  const Eigen::Index N = pred.mu_i_hat.size();
  const Eigen::Index J = est.psi0_hat.size() + 1;
  VectorXd zeta(N * J);
  for (Eigen::Index i = 0; i < N; ++i) {
    zeta(i * J) = pred.mu_i_hat(i) - est.mu_hat;
    zeta.segment(i * J + 1, J - 1) =
        pred.alpha_hat.row(i).transpose() - est.psi0_hat;
  }
  return zeta;
}

VectorXd stacked_treatment_effects(const IndividualPrediction& pred) {
  const Eigen::Index N = pred.alpha_hat.rows();
  const Eigen::Index d = pred.alpha_hat.cols();
  VectorXd psi(N * d);
  for (Eigen::Index i = 0; i < N; ++i)
    psi.segment(i * d, d) = pred.alpha_hat.row(i).transpose();
  return psi;
}

void write_predictions_csv(std::ostream& out, const ObservationSet& obs,
                           const IndividualPrediction& pred) {
  const int J = obs.design().J();
  out << "individual,group,mu_hat";
  for (int j = 1; j < J; ++j) out << ",alpha_" << j;
  out << '\n';
  for (int i = 0; i < obs.N(); ++i) {
    out << obs.labels()[i] << ',' << obs.design().group_of(i) << ','
        << csv::number(pred.mu_i_hat(i));
    for (int j = 0; j < J - 1; ++j) out << ',' << csv::number(pred.alpha_hat(i, j));
    out << '\n';
  }
}

}  // namespace rcr
