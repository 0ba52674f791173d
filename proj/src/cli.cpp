#include "rcr/cli.hpp"

#include "rcr/blue_blup.hpp"
#include "rcr/criteria.hpp"
#include "rcr/csv.hpp"
#include "rcr/design_opt.hpp"
#include "rcr/mixed_oracle.hpp"
#include "rcr/moments.hpp"
#include "rcr/verify.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace rcr {

namespace {

using nlohmann::json;

struct Flags {
  std::optional<int> J, N, K, n;
  std::optional<double> u, v, sigma2, b, rho, w;
  std::optional<std::string> config_path;
  std::string criterion = "A";
  std::string target = "estimation";
  int grid = 200;
  int reps = 20000;
  std::uint64_t seed = 42;
  std::string out_path;
  std::string format = "csv";
  std::string input_path;
  std::string dump_dir;
};

unsigned thread_cap() {
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RCR_DESIGN_THREADS")) {
    const int cap = csv::parse_int(env, "RCR_DESIGN_THREADS");
    if (cap < 1)
      throw std::invalid_argument("RCR_DESIGN_THREADS must be at least 1");
    threads = std::min(threads, static_cast<unsigned>(cap));
  }
  return threads;
}

template <typename T>
T need(const std::optional<T>& value, const char* flag) {
  if (!value) throw std::invalid_argument(fmt::format("missing required flag {}", flag));
  return *value;
}

/// Model from --config or from the individual flags. Variances come from
/// --u/--v, or from --b/--rho via v = rho/(1-rho), u = v/b.
ModelConfig resolve_config(const Flags& f, bool variances_required = true) {
  if (f.config_path) {
    if (f.J || f.N || f.K || f.u || f.v || f.sigma2)
      throw std::invalid_argument("--config cannot be combined with model flags");
    std::ifstream in(*f.config_path);
    if (!in)
      throw std::invalid_argument(
          fmt::format("cannot read configuration file '{}'", *f.config_path));
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw std::invalid_argument(fmt::format("invalid configuration JSON: {}", e.what()));
    }
    return ModelConfig::from_json(doc);
  }
  const int J = need(f.J, "--J");
  const int N = need(f.N, "--N");
  const int K = need(f.K, "--K");
  const double s2 = f.sigma2.value_or(1.0);
  if (f.u || f.v) {
    if (f.b || f.rho)
      throw std::invalid_argument("give either --u/--v or --b/--rho, not both");
    return {J, N, K, need(f.u, "--u"), need(f.v, "--v"), s2};
  }
  if (f.b && f.rho) {
    const double rho = *f.rho;
    if (!(rho > 0.0 && rho < 1.0))
      throw std::invalid_argument(fmt::format("--rho {} outside (0, 1)", rho));
    if (!(*f.b > 0.0))
      throw std::invalid_argument(fmt::format("--b must be positive, got {}", *f.b));
    const double v = rho / (1.0 - rho);
    return {J, N, K, v / *f.b, v, s2};
  }
  if (variances_required)
    throw std::invalid_argument("missing variances: give --u and --v, or --b and --rho");
  return {J, N, K, 1.0, 1.0, s2};
}

CriterionSpec resolve_spec(const Flags& f) {
  return {parse_criterion(f.criterion), parse_target(f.target)};
}

/// Writes to --out when given, otherwise to the command's output stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_)
        throw std::invalid_argument(fmt::format("cannot write output file '{}'", path));
      out_ = &file_;
    }
  }
  std::ostream& stream() { return *out_; }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

void emit(const Flags& f, std::ostream& out, const json& doc,
          const std::vector<std::string>& header,
          const std::vector<std::vector<std::string>>& rows) {
  Sink sink(f.out_path, out);
  auto& s = sink.stream();
  if (f.format == "json") {
    s << doc.dump(2) << '\n';
    return;
  }
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) s << (k ? "," : "") << fields[k];
    s << '\n';
  };
  line(header);
  for (const auto& row : rows) line(row);
}

int cmd_optimal(const Flags& f, std::ostream& out) {
  const ModelConfig config = resolve_config(f);
  const CriterionSpec spec = resolve_spec(f);
  const OptimalDesignResult opt = optimal_weight(config, spec);
  const ExactDesign exact = round_to_exact(config, spec, opt.w_star);
  const double exact_value = exact_criterion_value(config, spec, exact);
  const std::string method = opt.method == SolveMethod::ClosedForm ? "closed_form" : "numeric";
  json doc{{"criterion", to_string(spec.criterion)},
           {"target", to_string(spec.target)},
           {"config", config.to_json()},
           {"w_star", opt.w_star},
           {"method", method},
           {"criterion_value", opt.criterion_value},
           {"n", exact.n()},
           {"m", exact.m()},
           {"exact_criterion_value", exact_value}};
  emit(f, out, doc,
       {"criterion", "target", "w_star", "method", "criterion_value", "n", "m",
        "exact_criterion_value"},
       {{to_string(spec.criterion), to_string(spec.target), csv::number(opt.w_star),
         method, csv::number(opt.criterion_value), std::to_string(exact.n()),
         std::to_string(exact.m()), csv::number(exact_value)}});
  return kExitOk;
}

int cmd_criterion(const Flags& f, std::ostream& out) {
  const ModelConfig config = resolve_config(f);
  const CriterionSpec spec = resolve_spec(f);
  const double w = need(f.w, "--w");
  const double value = criterion_value(config, spec, w);
  const double eff = efficiency(config, spec, w);
  json doc{{"criterion", to_string(spec.criterion)},
           {"target", to_string(spec.target)},
           {"config", config.to_json()},
           {"w", w},
           {"criterion_value", value},
           {"efficiency", eff}};
  emit(f, out, doc, {"criterion", "target", "w", "criterion_value", "efficiency"},
       {{to_string(spec.criterion), to_string(spec.target), csv::number(w),
         csv::number(value), csv::number(eff)}});
  return kExitOk;
}

int cmd_sweep(const Flags& f, std::ostream& out) {
  const ModelConfig config = resolve_config(f, false);
  const CriterionSpec spec = resolve_spec(f);
  const double b = need(f.b, "--b");
  const auto rows = sweep(config, spec, b, default_rho_grid(f.grid), thread_cap());
  json doc{{"criterion", to_string(spec.criterion)},
           {"target", to_string(spec.target)},
           {"J", config.J()},
           {"N", config.N()},
           {"K", config.K()},
           {"sigma2", config.sigma2()},
           {"rows", json::array()}};
  std::vector<std::vector<std::string>> table;
  for (const auto& r : rows) {
    doc["rows"].push_back({{"rho", r.rho},
                           {"b", r.b},
                           {"w_star", r.w_star},
                           {"criterion_value", r.criterion_value},
                           {"efficiency_fixed", r.efficiency_fixed}});
    table.push_back({csv::number(r.rho), csv::number(r.b), csv::number(r.w_star),
                     csv::number(r.criterion_value), csv::number(r.efficiency_fixed)});
  }
  emit(f, out, doc, {"rho", "b", "w_star", "criterion_value", "efficiency_fixed"}, table);
  return kExitOk;
}

int cmd_round(const Flags& f, std::ostream& out) {
  const ModelConfig config = resolve_config(f);
  const CriterionSpec spec = resolve_spec(f);
  const double w = need(f.w, "--w");
  const ExactDesign exact = round_to_exact(config, spec, w);
  const double value = exact_criterion_value(config, spec, exact);
  json doc{{"w", w}, {"n", exact.n()}, {"m", exact.m()}, {"criterion_value", value}};
  emit(f, out, doc, {"w", "n", "m", "criterion_value"},
       {{csv::number(w), std::to_string(exact.n()), std::to_string(exact.m()),
         csv::number(value)}});
  return kExitOk;
}

void dump_matrix(const std::filesystem::path& path, const MatrixXd& m) {
  std::ofstream file(path);
  if (!file)
    throw std::invalid_argument(fmt::format("cannot write '{}'", path.string()));
  csv::write_matrix(file, m);
}

int cmd_verify(const Flags& f, std::ostream& out) {
  if (!f.dump_dir.empty()) {
    const ModelConfig config = resolve_config(f);
    const ExactDesign design =
        ExactDesign::from_treatment_size(config, need(f.n, "--n"));
    std::filesystem::create_directories(f.dump_dir);
    const std::filesystem::path dir(f.dump_dir);
    dump_matrix(dir / "cov_blue.csv", cov_blue(config, design.n(), design.m()).entries);
    dump_matrix(dir / "mse_blup.csv", mse_blup(config, design).entries);
    dump_matrix(dir / "henderson_c.csv",
                henderson_mse(build_system(config, design)).assembled());
    out << "wrote cov_blue.csv, mse_blup.csv, henderson_c.csv to " << f.dump_dir << '\n';
    return kExitOk;
  }

  const auto results = run_verification();
  bool all = true;
  json doc = json::array();
  std::vector<std::vector<std::string>> table;
  for (const auto& r : results) {
    all = all && r.passed();
    doc.push_back({{"check", r.name},
                   {"cases", r.cases},
                   {"worst", r.worst},
                   {"tolerance", r.tolerance},
                   {"passed", r.passed()},
                   {"failure", r.failure}});
    table.push_back({r.name, std::to_string(r.cases), fmt::format("{:.3g}", r.worst),
                     fmt::format("{:.0e}", r.tolerance), r.passed() ? "PASS" : "FAIL"});
  }
  emit(f, out, doc, {"check", "cases", "worst", "tolerance", "status"}, table);
  return all ? kExitOk : kExitFailure;
}

int cmd_simulate(const Flags& f, std::ostream& out) {
  const ModelConfig config = resolve_config(f);
  int n = 0;
  if (f.n) {
    n = *f.n;
  } else {
    n = round_to_exact(config, resolve_spec(f), need(f.w, "--n or --w")).n();
  }
  const ExactDesign design = ExactDesign::from_treatment_size(config, n);
  if (f.reps < 1)
    throw std::invalid_argument(fmt::format("--reps must be at least 1, got {}", f.reps));
  const SimulationResult sim = simulate_mse(config, design, f.reps, f.seed, thread_cap());
  const MomentMatrix theory = mse_blup(config, design);
  const double distance = relative_frobenius(sim.empirical.entries, theory.entries);
  double worst_z = 0.0;
  for (Eigen::Index k = 0; k < sim.mean_error.size(); ++k) {
    if (sim.standard_error(k) > 0.0)
      worst_z = std::max(worst_z, std::abs(sim.mean_error(k)) / sim.standard_error(k));
  }
  json doc{{"config", config.to_json()},
           {"n", design.n()},
           {"m", design.m()},
           {"reps", f.reps},
           {"seed", f.seed},
           {"relative_frobenius", distance},
           {"max_bias_z", worst_z}};
  emit(f, out, doc, {"n", "m", "reps", "seed", "relative_frobenius", "max_bias_z"},
       {{std::to_string(design.n()), std::to_string(design.m()), std::to_string(f.reps),
         std::to_string(f.seed), csv::number(distance), csv::number(worst_z)}});
  return kExitOk;
}

int cmd_predict(const Flags& f, std::ostream& out) {
  std::ifstream in(f.input_path);
  if (!in)
    throw std::invalid_argument(fmt::format("cannot read observation file '{}'", f.input_path));
  const ObservationSet obs = ObservationSet::read_csv(in);
  const auto& design = obs.design();
  if (f.J && *f.J != design.J())
    throw std::invalid_argument(fmt::format("--J {} but the data has {} groups", *f.J, design.J()));
  if (f.N && *f.N != design.N())
    throw std::invalid_argument(
        fmt::format("--N {} but the data has {} individuals", *f.N, design.N()));
  if (f.K && *f.K != obs.K())
    throw std::invalid_argument(fmt::format("--K {} but the data has {} replicates", *f.K, obs.K()));
  const ModelConfig config(design.J(), design.N(), obs.K(), need(f.u, "--u"), need(f.v, "--v"),
                           f.sigma2.value_or(1.0));
  const PopulationEstimate est = blue(obs, config);
  const IndividualPrediction pred = blup(obs, config);

  Sink sink(f.out_path, out);
  if (f.format == "json") {
    json doc{{"config", config.to_json()},
             {"mu_hat", est.mu_hat},
             {"alpha_hat", std::vector<double>(est.psi0_hat.begin(), est.psi0_hat.end())},
             {"individuals", json::array()}};
    for (int i = 0; i < obs.N(); ++i) {
      const VectorXd row = pred.alpha_hat.row(i).transpose();
      doc["individuals"].push_back({{"individual", obs.labels()[i]},
                                    {"group", design.group_of(i)},
                                    {"mu_hat", pred.mu_i_hat(i)},
                                    {"alpha_hat", std::vector<double>(row.begin(), row.end())}});
    }
    sink.stream() << doc.dump(2) << '\n';
  } else {
    write_predictions_csv(sink.stream(), obs, pred);
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal treatment/control allocation in multiple group random coefficient "
               "regression models",
               "rcr-design"};
  app.require_subcommand(1, 1);
  Flags f;

  auto model_flags = [&](CLI::App* cmd) {
    cmd->add_option("--J", f.J, "number of groups (J-1 treatments + control)");
    cmd->add_option("--N", f.N, "total number of individuals");
    cmd->add_option("--K", f.K, "observations per individual");
    cmd->add_option("--u", f.u, "intercept variance ratio");
    cmd->add_option("--v", f.v, "treatment-effect variance ratio");
    cmd->add_option("--sigma2", f.sigma2, "error variance (default 1)");
    cmd->add_option("--b", f.b, "variance ratio v/u");
    cmd->add_option("--rho", f.rho, "v/(1+v)");
    cmd->add_option("--config", f.config_path, "JSON model configuration file");
    cmd->add_option("--out", f.out_path, "write output to this file");
    cmd->add_option("--format", f.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
  };
  auto criterion_flags = [&](CLI::App* cmd) {
    cmd->add_option("--criterion", f.criterion, "A, D or E")
        ->check(CLI::IsMember({"A", "D", "E"}));
    cmd->add_option("--target", f.target, "estimation or prediction")
        ->check(CLI::IsMember({"estimation", "prediction"}));
  };

  auto* optimal = app.add_subcommand("optimal", "optimal weight and exact design");
  model_flags(optimal);
  criterion_flags(optimal);

  auto* criterion = app.add_subcommand("criterion", "criterion value at a weight");
  model_flags(criterion);
  criterion_flags(criterion);
  criterion->add_option("--w", f.w, "treatment-group weight")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "optimal weights and efficiencies over rho");
  model_flags(sweep_cmd);
  criterion_flags(sweep_cmd);
  sweep_cmd->add_option("--grid", f.grid, "number of rho values on [1e-6, 0.9999]");

  auto* round_cmd = app.add_subcommand("round", "round a weight to an exact design");
  model_flags(round_cmd);
  criterion_flags(round_cmd);
  round_cmd->add_option("--w", f.w, "treatment-group weight")->required();

  auto* verify = app.add_subcommand("verify", "check closed forms against the mixed-model oracle");
  model_flags(verify);
  verify->add_option("--dump", f.dump_dir, "write the moment matrices of one design as CSV");
  verify->add_option("--n", f.n, "treatment group size for --dump");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo check of the BLUP MSE matrix");
  model_flags(simulate);
  criterion_flags(simulate);
  simulate->add_option("--n", f.n, "treatment group size");
  simulate->add_option("--w", f.w, "treatment weight, rounded to an exact design");
  simulate->add_option("--reps", f.reps, "number of replicates");
  simulate->add_option("--seed", f.seed, "random seed");

  auto* predict = app.add_subcommand("predict", "BLUE and BLUP from an observation CSV");
  model_flags(predict);
  predict->add_option("--input", f.input_path, "CSV with group,individual,replicate,value")
      ->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (optimal->parsed()) return cmd_optimal(f, out);
    if (criterion->parsed()) return cmd_criterion(f, out);
    if (sweep_cmd->parsed()) return cmd_sweep(f, out);
    if (round_cmd->parsed()) return cmd_round(f, out);
    if (verify->parsed()) return cmd_verify(f, out);
    if (simulate->parsed()) return cmd_simulate(f, out);
    if (predict->parsed()) return cmd_predict(f, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace rcr
