#include "rcr/design_opt.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

namespace rcr {

double golden_section_minimize(const std::function<double(double)>& f,
                               double lo, double hi, double tolerance) {
  if (!(lo < hi))
    throw std::invalid_argument(
        fmt::format("empty search interval [{}, {}]", lo, hi));
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tolerance) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

namespace {

void check_unimodal(const std::function<double(double)>& f, double lo,
                    double hi, int points, const CriterionSpec& spec) {
  if (points < 3) return;
  std::vector<double> values(points);
  for (int k = 0; k < points; ++k)
    values[k] = f(lo + (hi - lo) * k / (points - 1));
  const auto best = std::min_element(values.begin(), values.end()) - values.begin();
  auto slack = [](double x) { return 1e-12 * std::max(1.0, std::abs(x)); };
  for (auto k = best; k > 0; --k) {
    if (values[k - 1] < values[k] - slack(values[k]))
      throw std::runtime_error(fmt::format(
          "{} criterion is not unimodal on the weight grid", spec.name()));
  }
  for (auto k = best; k + 1 < points; ++k) {
    if (values[k + 1] < values[k] - slack(values[k]))
      throw std::runtime_error(fmt::format(
          "{} criterion is not unimodal on the weight grid", spec.name()));
  }
}

}  // namespace

OptimalDesignResult minimize_criterion(const ModelConfig& config,
                                       const CriterionSpec& spec,
                                       const GoldenSectionOptions& options) {
  spec.check_supported(config.J());
  auto f = [&](double w) { return criterion_value(config, spec, w); };
  const double lo = options.boundary_gap;
  const double hi = max_weight(config.J()) - options.boundary_gap;
  check_unimodal(f, lo, hi, options.unimodality_grid, spec);
  const double w = golden_section_minimize(f, lo, hi, options.tolerance);
  return {w, f(w), SolveMethod::Numeric, spec};
}

double closed_form_weight(const ModelConfig& config, const CriterionSpec& spec) {
  spec.check_supported(config.J());
  const double J = config.J();
  const double K = config.K();
  const double u = config.u();
  const double v = config.v();
  const double ratio = config.control_factor() / config.treatment_factor();

  if (spec.target == Target::Estimation) {
    switch (spec.criterion) {
      case Criterion::A:
        return 1.0 / (J - 1 + std::sqrt(J - 1) * std::sqrt(ratio));
      case Criterion::D: {
        const double z =
            std::sqrt(4 * (J - 1) * K * v / config.control_factor() + J * J);
        return (J - 2 + z) / ((J - 1) * (J + z));
      }
      case Criterion::E:
        return 1.0 / ((J - 1) * (1 + std::sqrt(ratio)));
    }
  } else {
    switch (spec.criterion) {
      case Criterion::A:
        throw std::domain_error(
            "A-prediction has no closed-form optimal weight");
      case Criterion::D: {
        // Larger root of N t w^2 - (N t + 2) w + 1 = 0; t < 0 always.
        const double Nt = config.N() * std::log(ratio);
        return 1.0 / Nt + 0.5 + std::sqrt(1.0 / (Nt * Nt) + 0.25);
      }
      case Criterion::E:
        return (K * (2 * u + v) + 2) / (K * (4 * u + v) + 4);
    }
  }
  throw std::logic_error("unhandled criterion");
}

OptimalDesignResult optimal_weight(const ModelConfig& config,
                                   const CriterionSpec& spec) {
  spec.check_supported(config.J());
  if (spec.target == Target::Prediction && spec.criterion == Criterion::A)
    return minimize_criterion(config, spec);
  const double w = closed_form_weight(config, spec);
  return {w, criterion_value(config, spec, w), SolveMethod::ClosedForm, spec};
}

double limiting_weight(const CriterionSpec& spec, int J, Regime regime,
                       double b, int N) {
  spec.check_supported(J);
  switch (regime) {
    case Regime::InterceptVarianceLarge:
      return fixed_effects_weight(spec, J);
    case Regime::TreatmentVarianceLarge:
      return max_weight(J);
    case Regime::BothLarge:
      break;
  }
  if (!(b > 0.0))
    throw std::invalid_argument(
        fmt::format("variance ratio b must be positive, got {}", b));
  const double Jd = J;
  if (spec.target == Target::Estimation) {
    switch (spec.criterion) {
      case Criterion::A:
        return 1.0 / (Jd - 1 + std::sqrt(Jd - 1) * std::sqrt(1.0 / (1.0 + b)));
      case Criterion::D: {
        const double z = std::sqrt(4 * (Jd - 1) * b + Jd * Jd);
        return (Jd - 2 + z) / ((Jd - 1) * (Jd + z));
      }
      case Criterion::E:
        return 1.0 / ((Jd - 1) * (1 + std::sqrt(1.0 / (1.0 + b))));
    }
  } else {
    switch (spec.criterion) {
      case Criterion::A:
        throw std::domain_error(
            "no closed-form limit of the A-prediction weight for large u and v");
      case Criterion::D: {
        if (N < 1)
          throw std::invalid_argument(
              "the D-prediction limit needs the number of individuals N");
        const double Nl = N * std::log1p(b);
        return -1.0 / Nl + 0.5 + std::sqrt(1.0 / (Nl * Nl) + 0.25);
      }
      case Criterion::E:
        return (2.0 / b + 1.0) / (4.0 / b + 1.0);
    }
  }
  throw std::logic_error("unhandled criterion");
}

double efficiency(const ModelConfig& config, const CriterionSpec& spec,
                  double w, const OptimalDesignResult& optimum) {
  const double at_w = criterion_value(config, spec, w);
  if (spec.criterion == Criterion::D) {
    const int dim = criterion_dimension(config, spec);
    return std::exp((optimum.criterion_value - at_w) / dim);
  }
  return optimum.criterion_value / at_w;
}

double efficiency(const ModelConfig& config, const CriterionSpec& spec,
                  double w) {
  return efficiency(config, spec, w, optimal_weight(config, spec));
}

ExactDesign round_to_exact(const ModelConfig& config, const CriterionSpec& spec,
                           double w) {
  const ApproximateDesign approx(config.J(), w);
  const int N = config.N();
  const int J = config.J();
  if (N < J)
    throw std::invalid_argument(
        fmt::format("N = {} cannot fill J = {} groups", N, J));
  const int n_max = (N - 1) / (J - 1);
  auto clamp = [&](double n) {
    return std::clamp(static_cast<int>(n), 1, n_max);
  };
  const double target = N * approx.w();
  const int lo = clamp(std::floor(target));
  const int hi = clamp(std::ceil(target));

  ExactDesign best = ExactDesign::from_treatment_size(config, lo);
  if (hi != lo) {
    const ExactDesign other = ExactDesign::from_treatment_size(config, hi);
    if (exact_criterion_value(config, spec, other) <
        exact_criterion_value(config, spec, best))
      best = other;
  }
  return best;
}

std::vector<double> default_rho_grid(int points) {
  if (points < 2)
    throw std::invalid_argument(
        fmt::format("rho grid needs at least 2 points, got {}", points));
  const double lo = 1e-6;
  const double hi = 0.9999;
  std::vector<double> grid(points);
  for (int k = 0; k < points; ++k) grid[k] = lo + (hi - lo) * k / (points - 1);
  grid.back() = hi;
  return grid;
}

std::vector<SweepRow> sweep(const ModelConfig& config_template,
                            const CriterionSpec& spec, double b,
                            const std::vector<double>& rho_grid,
                            unsigned threads) {
  if (rho_grid.empty()) throw std::invalid_argument("empty rho grid");
  if (!(b > 0.0) || !std::isfinite(b))
    throw std::invalid_argument(
        fmt::format("variance ratio b must be positive, got {}", b));
  for (double rho : rho_grid) {
    if (!(rho > 0.0 && rho < 1.0))
      throw std::invalid_argument(
          fmt::format("rho = {} outside the open interval (0, 1)", rho));
  }
  spec.check_supported(config_template.J());
  const double w_fixed = fixed_effects_weight(spec, config_template.J());

  std::vector<SweepRow> rows(rho_grid.size());
  auto evaluate = [&](std::size_t k) {
    const double rho = rho_grid[k];
    const double v = rho / (1.0 - rho);
    const ModelConfig config = config_template.with_variances(v / b, v);
    const OptimalDesignResult opt = optimal_weight(config, spec);
    rows[k] = {rho, b, opt.w_star, opt.criterion_value,
               efficiency(config, spec, w_fixed, opt)};
  };

  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(rows.size()));
  if (threads == 1) {
    for (std::size_t k = 0; k < rows.size(); ++k) evaluate(k);
    return rows;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t k = t; k < rows.size(); k += threads) evaluate(k);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

}  // namespace rcr
