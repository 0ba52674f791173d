#pragma once

#include "rcr/model.hpp"

#include <iosfwd>
#include <vector>

namespace rcr {

/// One long-form observation row: (group, individual, replicate, value).
struct ObservationRecord {
  int group;
  int individual;
  int replicate;
  double value;
};

/// Complete balanced observations Y_{jik}, individuals in global group order
/// (treatment group 1 first, control last).
class ObservationSet {
 public:
  /// `values` is ordered like the stacked observation vector Y: individual
  /// by individual in group order, K replicates each. Individual labels
  /// default to 1..N.
  ObservationSet(const ExactDesign& design, int K, VectorXd values,
                 std::vector<int> labels = {});

  /// Builds the set from long-form rows. Group sizes are inferred; every
  /// treatment group must have the same size, every individual exactly
  /// replicates 1..K, and individual labels must be unique across groups.
  static ObservationSet from_records(int J,
                                     const std::vector<ObservationRecord>& rows);

  /// Reads `group,individual,replicate,value` CSV. J is the largest group id.
  static ObservationSet read_csv(std::istream& in);

  const ExactDesign& design() const { return design_; }
  int K() const { return K_; }
  int N() const { return design_.N(); }
  const VectorXd& values() const { return values_; }
  const std::vector<int>& labels() const { return labels_; }

  double at(int individual, int replicate) const {
    return values_(individual * K_ + replicate);
  }

 private:
  ExactDesign design_;
  int K_;
  VectorXd values_;
  std::vector<int> labels_;
};

struct GroupMeans {
  VectorXd group;       // Ybar_j, j = 1..J (stored 0-based)
  VectorXd individual;  // Ybar_{j,i}, i = 1..N (stored 0-based)
};

/// BLUE of the population intercept and mean treatment effects.
struct PopulationEstimate {
  double mu_hat;
  VectorXd psi0_hat;  // length J-1
};

/// BLUP of the individual intercepts and individual treatment effects.
struct IndividualPrediction {
  VectorXd mu_i_hat;  // length N
  MatrixXd alpha_hat; // N x (J-1)
};

GroupMeans group_means(const ObservationSet& obs);

PopulationEstimate blue(const ObservationSet& obs, const ModelConfig& config);

IndividualPrediction blup(const ObservationSet& obs, const ModelConfig& config);

/// theta_0 estimate stacked as (mu, alpha_1, ..., alpha_{J-1}).
VectorXd stacked_fixed_effects(const PopulationEstimate& est);

/// zeta prediction stacked individual by individual: theta_i_hat - theta_0_hat.
VectorXd stacked_random_effects(const PopulationEstimate& est,
                                const IndividualPrediction& pred);

/// Psi_hat = (alpha_{1i}, ..., alpha_{J-1,i}) stacked over i.
VectorXd stacked_treatment_effects(const IndividualPrediction& pred);

/// Writes `individual,group,mu_hat,alpha_1,...,alpha_{J-1}`.
void write_predictions_csv(std::ostream& out, const ObservationSet& obs,
                           const IndividualPrediction& pred);

}  // namespace rcr
