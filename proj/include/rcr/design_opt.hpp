#pragma once

#include "rcr/criteria.hpp"
#include "rcr/model.hpp"

#include <functional>
#include <vector>

namespace rcr {

enum class SolveMethod { ClosedForm, Numeric };

struct OptimalDesignResult {
  double w_star;
  double criterion_value;
  SolveMethod method;
  CriterionSpec spec;
};

/// Golden-section search settings for minimising a criterion over (0, 1/(J-1)).
struct GoldenSectionOptions {
  double boundary_gap = 1e-9;  // search on [gap, 1/(J-1) - gap]
  double tolerance = 1e-10;    // absolute bracket width on w
  int unimodality_grid = 200;  // 0 disables the grid check
};

/// Minimiser of a unimodal function on [lo, hi].
double golden_section_minimize(const std::function<double(double)>& f,
                               double lo, double hi, double tolerance);

/// Numeric minimiser of any supported criterion. Throws std::runtime_error
/// when the criterion is not unimodal on the check grid.
OptimalDesignResult minimize_criterion(const ModelConfig& config,
                                       const CriterionSpec& spec,
                                       const GoldenSectionOptions& options = {});

/// Closed form where one exists; numeric minimisation for A-prediction.
OptimalDesignResult optimal_weight(const ModelConfig& config,
                                   const CriterionSpec& spec);

/// Closed-form weight only; throws std::domain_error for A-prediction.
double closed_form_weight(const ModelConfig& config, const CriterionSpec& spec);

enum class Regime { InterceptVarianceLarge, TreatmentVarianceLarge, BothLarge };

/// Limit of the optimal weight as u, v, or both (with b = v/u fixed) grow.
/// `N` is only used by D-prediction in the BothLarge regime.
double limiting_weight(const CriterionSpec& spec, int J, Regime regime,
                       double b = 0.0, int N = 0);

/// Criterion efficiency of w relative to the optimal weight, in (0, 1].
double efficiency(const ModelConfig& config, const CriterionSpec& spec,
                  double w);

/// Same, with a precomputed optimum.
double efficiency(const ModelConfig& config, const CriterionSpec& spec,
                  double w, const OptimalDesignResult& optimum);

/// Best exact design among n = floor(Nw), ceil(Nw), clamped so that both
/// groups stay non-empty.
ExactDesign round_to_exact(const ModelConfig& config, const CriterionSpec& spec,
                           double w);

struct SweepRow {
  double rho;
  double b;
  double w_star;
  double criterion_value;
  double efficiency_fixed;
};

/// For each rho: v = rho/(1-rho), u = v/b, then the optimum and the
/// efficiency of the fixed-effects weight. Rows keep the grid order.
std::vector<SweepRow> sweep(const ModelConfig& config_template,
                            const CriterionSpec& spec, double b,
                            const std::vector<double>& rho_grid,
                            unsigned threads = 1);

/// `points` values equally spaced on [1e-6, 0.9999].
std::vector<double> default_rho_grid(int points);

}  // namespace rcr
