#include "rcr/criteria.hpp"

#include "rcr/moments.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace rcr {

void CriterionSpec::check_supported(int J) const {
  if (target == Target::Prediction && criterion != Criterion::A && J != 2)
    throw std::domain_error(fmt::format(
        "{} is only available for J = 2 (one treatment group), got J = {}",
        name(), J));
}

std::string CriterionSpec::name() const {
  return fmt::format("{}-{}", to_string(criterion), to_string(target));
}

Criterion parse_criterion(std::string_view s) {
  if (s == "A" || s == "a") return Criterion::A;
  if (s == "D" || s == "d") return Criterion::D;
  if (s == "E" || s == "e") return Criterion::E;
  throw std::invalid_argument(fmt::format("unknown criterion '{}'", s));
}

Target parse_target(std::string_view s) {
  if (s == "estimation") return Target::Estimation;
  if (s == "prediction") return Target::Prediction;
  throw std::invalid_argument(fmt::format("unknown target '{}'", s));
}

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::A: return "A";
    case Criterion::D: return "D";
    case Criterion::E: return "E";
  }
  return "?";
}

std::string to_string(Target t) {
  return t == Target::Estimation ? "estimation" : "prediction";
}

int criterion_dimension(const ModelConfig& config, const CriterionSpec& spec) {
  return spec.target == Target::Estimation ? config.J() - 1
                                           : config.N() * (config.J() - 1);
}

double criterion_value(const ModelConfig& config, const CriterionSpec& spec,
                       double w) {
  spec.check_supported(config.J());
  const ApproximateDesign design(config.J(), w);
  const double J = config.J();
  const double N = config.N();
  const double K = config.K();
  const double v = config.v();
  const double s2 = config.sigma2();
  const double ctrl = config.control_factor();
  const double treat = config.treatment_factor();
  const double control_w = design.control_weight();

  if (spec.target == Target::Estimation) {
    switch (spec.criterion) {
      case Criterion::A:
        return s2 * (J - 1) / (K * N) * (treat / w + ctrl / control_w);
      case Criterion::D: {
        const double c = (J - 1) * std::log(s2 / (K * N));
        return c + std::log(treat / w + (J - 1) * ctrl / control_w) +
               (J - 2) * std::log(treat / w);
      }
      case Criterion::E:
        return s2 / (K * N) * (treat / w + (J - 1) * ctrl / control_w);
    }
  } else {
    switch (spec.criterion) {
      case Criterion::A:
        return s2 * (J - 1) *
               (treat / (K * w) + ctrl / (K * control_w) +
                v * (N - 2 - K * v * (N * w - 1) / treat));
      case Criterion::D: {
        // ln((sigma2)^N v^(N-1) (K(u+v)+1) / K), expanded to avoid overflow.
        const double d = N * std::log(s2) + (N - 1) * std::log(v) +
                         std::log(treat / K);
        const double t = std::log(ctrl / treat);
        return d + N * w * t - std::log(w * (1 - w));
      }
      case Criterion::E: {
        const double root = std::sqrt(two_group_discriminant(config, w));
        return 0.5 * s2 *
               (v / w + ctrl / (K * w * (1 - w)) + root / (K * w * (1 - w)));
      }
    }
  }
  throw std::logic_error("unhandled criterion");
}

double exact_criterion_value(const ModelConfig& config,
                             const CriterionSpec& spec,
                             const ExactDesign& design) {
  spec.check_supported(config.J());
  design.check_consistent(config);
  if (spec.target == Target::Estimation) {
    switch (spec.criterion) {
      case Criterion::A:
        return cov_blue(config, design.n(), design.m()).trace();
      case Criterion::D:
        return eig_cov_blue(config, design.n(), design.m()).log_det();
      case Criterion::E:
        return eig_cov_blue(config, design.n(), design.m()).max();
    }
  } else {
    switch (spec.criterion) {
      case Criterion::A:
        return mse_blup(config, design).trace();
      case Criterion::D:
        return eig_mse_two_group(config, design).log_det();
      case Criterion::E:
        return eig_mse_two_group(config, design).max();
    }
  }
  throw std::logic_error("unhandled criterion");
}

double fixed_effects_weight(const CriterionSpec& spec, int J) {
  if (J < 2)
    throw std::invalid_argument(fmt::format("J must be at least 2, got {}", J));
  spec.check_supported(J);
  if (spec.target == Target::Prediction) {
    if (spec.criterion == Criterion::A) return 1.0 / (J - 1 + std::sqrt(J - 1.0));
    return 0.5;
  }
  switch (spec.criterion) {
    case Criterion::A: return 1.0 / (J - 1 + std::sqrt(J - 1.0));
    case Criterion::D: return 1.0 / J;
    case Criterion::E: return 1.0 / (2.0 * (J - 1));
  }
  throw std::logic_error("unhandled criterion");
}

}  // namespace rcr
