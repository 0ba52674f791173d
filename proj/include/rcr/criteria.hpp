#pragma once

#include "rcr/model.hpp"

#include <string>
#include <string_view>

namespace rcr {

enum class Criterion { A, D, E };
enum class Target { Estimation, Prediction };

/// Which functional of which moment matrix is minimised. A is the trace, D
/// the natural log-determinant and E the largest eigenvalue; Estimation
/// targets the mean treatment effects and Prediction the individual ones.
struct CriterionSpec {
  Criterion criterion;
  Target target;

  /// D and E for prediction are only available with one treatment group.
  void check_supported(int J) const;
  std::string name() const;

  friend bool operator==(const CriterionSpec&, const CriterionSpec&) = default;
};

Criterion parse_criterion(std::string_view s);
Target parse_target(std::string_view s);
std::string to_string(Criterion c);
std::string to_string(Target t);

/// Criterion of the approximate design with treatment weight w.
double criterion_value(const ModelConfig& config, const CriterionSpec& spec,
                       double w);

/// Criterion of an exact design, evaluated from the moment matrices (or
/// their closed-form spectra) at integer group sizes.
double exact_criterion_value(const ModelConfig& config,
                             const CriterionSpec& spec,
                             const ExactDesign& design);

/// Dimension of the matrix behind the criterion: J-1 or N(J-1).
int criterion_dimension(const ModelConfig& config, const CriterionSpec& spec);

/// Optimal weight of the one-way layout without random effects.
double fixed_effects_weight(const CriterionSpec& spec, int J);

}  // namespace rcr
