#include "surt/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "surt/cea.hpp"
#include "surt/chain_store.hpp"
#include "surt/csv.hpp"
#include "surt/data.hpp"
#include "surt/errors.hpp"
#include "surt/manifest.hpp"
#include "surt/posterior.hpp"
#include "surt/priors.hpp"
#include "surt/rng.hpp"
#include "surt/sampler.hpp"
#include "surt/simgen.hpp"

namespace surt {

namespace {

using nlohmann::json;

// ---- output directory plumbing ----

// Collects artifacts and the manifest for one command. Inputs are digested
// as they are read; artifacts are recorded as they are written, so a failure
// manifest lists exactly what reached disk.
struct OutputBundle {
  std::filesystem::path dir;
  RunManifest manifest;

  std::string path_of(const std::string& name) const {
    return (dir / name).string();
  }
  void note_artifact(const std::string& name) {
    manifest.artifacts.push_back(name);
  }
  void add_input(const std::string& path) {
    manifest.inputs.push_back({path, sha256_file(path)});
  }
  void add_json(const std::string& name, const json& j) {
    const std::string path = path_of(name);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out) fail(ErrorCode::IoError, "short write to " + path);
    note_artifact(name);
  }
  void add_csv(const std::string& name, const std::vector<std::string>& names,
               const std::vector<std::vector<double>>& columns) {
    write_csv(path_of(name), names, columns);
    note_artifact(name);
  }
  // CSV with free-form cells, used where rows carry identifiers.
  void add_table(const std::string& name,
                 const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
    const std::string path = path_of(name);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path);
    for (std::size_t c = 0; c < header.size(); ++c)
      out << (c ? "," : "") << header[c];
    out << "\n";
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c)
        out << (c ? "," : "") << row[c];
      out << "\n";
    }
    if (!out) fail(ErrorCode::IoError, "short write to " + path);
    note_artifact(name);
  }
  void finish() {
    manifest.finished_at = iso_utc_now();
    write_manifest(dir.string(), manifest);
  }
};

int execute_command(const std::string& command, const std::string& out_dir,
                    const std::function<void(OutputBundle&)>& body) {
  OutputBundle bundle;
  bundle.dir = out_dir;
  std::error_code ec;
  std::filesystem::create_directories(bundle.dir, ec);
  if (ec) {
    std::fprintf(stderr, "surt %s: cannot create %s: %s\n", command.c_str(),
                 out_dir.c_str(), ec.message().c_str());
    return 2;
  }
  bundle.manifest.command = command;
  bundle.manifest.version = library_version();
  bundle.manifest.started_at = iso_utc_now();

  const auto finish_failed = [&](ErrorCode code, const std::string& message) {
    const bool numerical = error_code_is_numerical(code);
    try {
      bundle.add_json("error.json", json{{"code", error_code_name(code)},
                                         {"numerical", numerical},
                                         {"message", message}});
      bundle.manifest.error = message;
      bundle.finish();
    } catch (const Error&) {
      // The directory became unwritable; the stderr line still reports.
    }
    std::fprintf(stderr, "surt %s: %s\n", command.c_str(), message.c_str());
    return numerical ? 3 : 2;
  };

  try {
    body(bundle);
  } catch (const Error& e) {
    return finish_failed(e.code(), e.what());
  } catch (const std::exception& e) {
    return finish_failed(ErrorCode::NumericalFailure, e.what());
  }
  bundle.finish();
  return 0;
}

// ---- config plumbing ----

const char* mode_name(Mode mode) {
  return mode == Mode::Probit ? "probit" : "continuous";
}

void set_mode(ModelConfig& cfg, const std::string& request) {
  if (request == "auto") {
    cfg.mode_declared = false;
    return;
  }
  cfg.mode_declared = true;
  if (request == "continuous") {
    cfg.mode = Mode::Continuous;
  } else if (request == "probit") {
    cfg.mode = Mode::Probit;
  } else {
    fail(ErrorCode::InvalidConfig, "mode must be auto, continuous, or probit");
  }
}

double num_value(const json& v, const std::string& key) {
  if (!v.is_number())
    fail(ErrorCode::InvalidConfig, "config key " + key + " must be a number");
  return v.get<double>();
}

int int_value(const json& v, const std::string& key) {
  if (!v.is_number_integer())
    fail(ErrorCode::InvalidConfig, "config key " + key + " must be an integer");
  return v.get<int>();
}

bool bool_value(const json& v, const std::string& key) {
  if (!v.is_boolean())
    fail(ErrorCode::InvalidConfig, "config key " + key + " must be a boolean");
  return v.get<bool>();
}

// Strict: unknown keys are rejected so typos cannot silently fall back to
// defaults.
void apply_config_json(const json& j, ModelConfig& cfg) {
  if (!j.is_object())
    fail(ErrorCode::InvalidConfig, "config root must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "m") {
      cfg.m = int_value(value, key);
    } else if (key == "kappa") {
      cfg.kappa = num_value(value, key);
    } else if (key == "q_z") {
      cfg.q_z = num_value(value, key);
    } else if (key == "alpha") {
      cfg.alpha = num_value(value, key);
    } else if (key == "beta") {
      cfg.beta = num_value(value, key);
    } else if (key == "nu") {
      cfg.nu = num_value(value, key);
    } else if (key == "alpha_sigma") {
      cfg.alpha_sigma = num_value(value, key);
    } else if (key == "n_mcmc") {
      cfg.n_mcmc = int_value(value, key);
    } else if (key == "n_burnin") {
      cfg.n_burnin = int_value(value, key);
    } else if (key == "nu_prop") {
      cfg.nu_prop = num_value(value, key);
    } else if (key == "p_grow") {
      cfg.p_grow = num_value(value, key);
    } else if (key == "p_prune") {
      cfg.p_prune = num_value(value, key);
    } else if (key == "p_change") {
      cfg.p_change = num_value(value, key);
    } else if (key == "seed") {
      if (!value.is_number_unsigned() && !value.is_number_integer())
        fail(ErrorCode::InvalidConfig, "config key seed must be an integer");
      cfg.seed = value.get<std::uint64_t>();
    } else if (key == "n_chains") {
      cfg.n_chains = int_value(value, key);
    } else if (key == "independence") {
      cfg.independence = bool_value(value, key);
    } else if (key == "store_forests") {
      cfg.store_forests = bool_value(value, key);
    } else if (key == "store_latents") {
      cfg.store_latents = bool_value(value, key);
    } else if (key == "mode") {
      if (!value.is_string())
        fail(ErrorCode::InvalidConfig, "config key mode must be a string");
      set_mode(cfg, value.get<std::string>());
    } else {
      fail(ErrorCode::InvalidConfig, "unknown config key " + key);
    }
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded())
    fail(ErrorCode::ParseError, path + ": malformed JSON");
  return j;
}

json config_json(const ModelConfig& cfg) {
  return json{{"mode", mode_name(cfg.mode)},
              {"mode_declared", cfg.mode_declared},
              {"independence", cfg.independence},
              {"m", cfg.m},
              {"kappa", cfg.kappa},
              {"q_z", cfg.q_z},
              {"alpha", cfg.alpha},
              {"beta", cfg.beta},
              {"nu", cfg.nu},
              {"alpha_sigma", cfg.alpha_sigma},
              {"n_mcmc", cfg.n_mcmc},
              {"n_burnin", cfg.n_burnin},
              {"nu_prop", cfg.nu_prop},
              {"p_grow", cfg.p_grow},
              {"p_prune", cfg.p_prune},
              {"p_change", cfg.p_change},
              {"seed", cfg.seed},
              {"n_chains", cfg.n_chains},
              {"store_forests", cfg.store_forests},
              {"store_latents", cfg.store_latents}};
}

// Shared sampler/prior flags. Mode, covariance structure, and chain-count
// flags are added per command, since not every command honors them.
struct ConfigFlags {
  std::string config_path;
  int m = 0, n_mcmc = 0, n_burnin = 0, n_chains = 0;
  double kappa = 0.0, q_z = 0.0, nu = 0.0, alpha = 0.0, beta = 0.0;
  double alpha_sigma = 0.0, nu_prop = 0.0;
  std::uint64_t seed = 0;
  std::string mode = "auto";
  bool independence = false;
  bool no_forests = false;
};

void add_config_flags(CLI::App* sub, ConfigFlags& f) {
  sub->add_option("--config", f.config_path, "JSON config file");
  sub->add_option("--m", f.m, "trees per outcome");
  sub->add_option("--n-mcmc", f.n_mcmc, "total sweeps");
  sub->add_option("--n-burnin", f.n_burnin, "burn-in sweeps");
  sub->add_option("--kappa", f.kappa, "leaf prior spread");
  sub->add_option("--q-z", f.q_z, "probit leaf prior half-width");
  sub->add_option("--nu", f.nu, "error scale degrees of freedom");
  sub->add_option("--alpha-sigma", f.alpha_sigma,
                  "prior mass below the pilot residual sd");
  sub->add_option("--alpha", f.alpha, "split probability base");
  sub->add_option("--beta", f.beta, "split probability depth penalty");
  sub->add_option("--nu-prop", f.nu_prop,
                  "correlation proposal concentration");
  sub->add_option("--seed", f.seed, "RNG seed");
}

void add_mode_flag(CLI::App* sub, ConfigFlags& f) {
  sub->add_option("--mode", f.mode, "auto, continuous, or probit")
      ->check(CLI::IsMember({"auto", "continuous", "probit"}));
}

// Defaults, then the JSON file, then explicit flags.
ModelConfig build_config(const CLI::App* sub, const ConfigFlags& f,
                         OutputBundle& bundle) {
  ModelConfig cfg;
  if (!f.config_path.empty()) {
    bundle.add_input(f.config_path);
    apply_config_json(read_json_file(f.config_path), cfg);
  }
  if (sub->count("--m")) cfg.m = f.m;
  if (sub->count("--n-mcmc")) cfg.n_mcmc = f.n_mcmc;
  if (sub->count("--n-burnin")) cfg.n_burnin = f.n_burnin;
  if (sub->count("--kappa")) cfg.kappa = f.kappa;
  if (sub->count("--q-z")) cfg.q_z = f.q_z;
  if (sub->count("--nu")) cfg.nu = f.nu;
  if (sub->count("--alpha-sigma")) cfg.alpha_sigma = f.alpha_sigma;
  if (sub->count("--alpha")) cfg.alpha = f.alpha;
  if (sub->count("--beta")) cfg.beta = f.beta;
  if (sub->count("--nu-prop")) cfg.nu_prop = f.nu_prop;
  if (sub->count("--seed")) cfg.seed = f.seed;
  return cfg;
}

// ---- CSV-to-dataset assembly ----

int find_column(const CsvTable& t, const std::string& name) {
  for (std::size_t c = 0; c < t.names.size(); ++c)
    if (t.names[c] == name) return static_cast<int>(c);
  return -1;
}

const std::vector<double>& require_column(const CsvTable& t,
                                          const std::string& name) {
  const int idx = find_column(t, name);
  if (idx < 0) fail(ErrorCode::MissingColumn, "missing column " + name);
  return t.columns[static_cast<std::size_t>(idx)];
}

// Outcome columns by name, every other column (minus exclusions) a covariate
// in file order. Declared categorical columns must carry integer codes; their
// level count is taken from the largest code seen.
Dataset dataset_from_table(const CsvTable& t,
                           const std::vector<std::string>& y_names,
                           const std::vector<std::string>& categorical,
                           const std::vector<std::string>& exclude) {
  const std::set<std::string> y_set(y_names.begin(), y_names.end());
  if (y_set.size() != y_names.size())
    fail(ErrorCode::InvalidArgument, "duplicate outcome column names");
  const std::set<std::string> cat_set(categorical.begin(), categorical.end());
  const std::set<std::string> excl_set(exclude.begin(), exclude.end());
  for (const auto& name : y_names) {
    (void)require_column(t, name);
    if (excl_set.count(name))
      fail(ErrorCode::InvalidArgument,
           "outcome column " + name + " cannot be dropped");
  }
  for (const auto& name : exclude) (void)require_column(t, name);
  for (const auto& name : categorical) {
    (void)require_column(t, name);
    if (y_set.count(name) || excl_set.count(name))
      fail(ErrorCode::InvalidArgument,
           "categorical column " + name + " is not a covariate");
  }

  Dataset ds;
  for (std::size_t c = 0; c < t.names.size(); ++c) {
    const std::string& name = t.names[c];
    if (y_set.count(name) || excl_set.count(name)) continue;
    ds.x_names.push_back(name);
    if (cat_set.count(name)) {
      double max_code = 0.0;
      for (double v : t.columns[c]) {
        if (v != std::floor(v) || v < 0.0)
          fail(ErrorCode::InvalidArgument,
               "categorical covariate " + name +
                   " must hold integer codes starting at zero");
        max_code = std::max(max_code, v);
      }
      ds.x_kinds.push_back(ColumnKind::Categorical);
      ds.x_levels.push_back(static_cast<int>(max_code) + 1);
    } else {
      ds.x_kinds.push_back(ColumnKind::Continuous);
      ds.x_levels.push_back(0);
    }
    ds.x.push_back(t.columns[c]);
  }
  for (const auto& name : y_names) {
    ds.y_names.push_back(name);
    ds.y.push_back(require_column(t, name));
  }
  return ds;
}

// ---- shared report builders ----

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json calibration_json(const CalibratedPriors& priors, const ModelConfig& cfg,
                      const std::vector<std::string>& y_names) {
  json outcomes = json::array();
  for (std::size_t j = 0; j < priors.sigma_hat.size(); ++j)
    outcomes.push_back({{"name", y_names[j]},
                        {"sigma_hat_scaled", priors.sigma_hat[j]},
                        {"a_scale", priors.a_scale[j]},
                        {"pilot_lasso", priors.sigma_hat_lasso[j] != 0.0}});
  return json{{"mode", mode_name(cfg.mode)},
              {"leaf_sd", priors.leaf_sd},
              {"nu", cfg.nu},
              {"alpha_sigma", cfg.alpha_sigma},
              {"outcomes", outcomes}};
}

json diagnostics_json(const ChainResult& chain) {
  static const char* kMoveNames[3] = {"grow", "prune", "change"};
  json moves;
  for (int i = 0; i < 3; ++i) {
    const long p = chain.moves.proposed[i];
    const long a = chain.moves.accepted[i];
    moves[kMoveNames[i]] = {
        {"proposed", p},
        {"accepted", a},
        {"rate", p > 0 ? static_cast<double>(a) / p : 0.0}};
  }
  const int retained = static_cast<int>(chain.sigma_retained.size());
  json j{{"mode", mode_name(chain.config.mode)},
         {"retained_draws", retained},
         {"total_sweeps", chain.sigma_all.size()},
         {"design_names", chain.design_names},
         {"moves", moves}};
  if (chain.config.mode == Mode::Probit)
    j["px"] = {{"proposed", chain.px_proposed},
               {"accepted", chain.px_accepted},
               {"rate", chain.px_proposed > 0
                            ? static_cast<double>(chain.px_accepted) /
                                  chain.px_proposed
                            : 0.0}};
  if (retained > 0) {
    const int d = static_cast<int>(chain.sigma_retained[0].rows());
    Matrix acc = Matrix::Zero(d, d);
    for (const auto& s : chain.sigma_retained)
      acc += chain.config.mode == Mode::Continuous
                 ? sigma_to_original(chain.scaler, s)
                 : s;
    acc /= static_cast<double>(retained);
    j["sigma_mean"] = matrix_json(acc);
  }
  return j;
}

// Concatenates retained draws of independent chains; importance shares are
// averaged (each chain retains the same draw count).
ChainResult merge_chains(std::vector<ChainResult> chains) {
  ChainResult out = std::move(chains[0]);
  for (std::size_t c = 1; c < chains.size(); ++c) {
    ChainResult& ch = chains[c];
    const auto append = [](auto& dst, auto& src) {
      dst.insert(dst.end(), std::make_move_iterator(src.begin()),
                 std::make_move_iterator(src.end()));
    };
    append(out.sigma_all, ch.sigma_all);
    append(out.sigma_retained, ch.sigma_retained);
    for (std::size_t k = 0; k < out.fits.size(); ++k)
      append(out.fits[k], ch.fits[k]);
    append(out.forests, ch.forests);
    append(out.latents, ch.latents);
    out.importance += ch.importance;
    for (int i = 0; i < 3; ++i) {
      out.moves.proposed[i] += ch.moves.proposed[i];
      out.moves.accepted[i] += ch.moves.accepted[i];
    }
    out.px_proposed += ch.px_proposed;
    out.px_accepted += ch.px_accepted;
  }
  if (chains.size() > 1)
    out.importance /= static_cast<double>(chains.size());
  return out;
}

// ---- fit ----

struct FitOptions {
  std::string data_path, out_dir;
  std::vector<std::string> y_names, categorical, drop;
  ConfigFlags flags;
};

void cmd_fit(OutputBundle& bundle, const CLI::App* sub,
             const FitOptions& opt) {
  bundle.add_input(opt.data_path);
  const CsvTable table = read_csv(opt.data_path);
  const Dataset ds =
      dataset_from_table(table, opt.y_names, opt.categorical, opt.drop);

  ModelConfig cfg = build_config(sub, opt.flags, bundle);
  if (sub->count("--mode")) set_mode(cfg, opt.flags.mode);
  if (sub->count("--independence")) cfg.independence = true;
  if (sub->count("--chains")) cfg.n_chains = opt.flags.n_chains;
  if (sub->count("--no-forests")) cfg.store_forests = false;

  ChainResult merged = merge_chains(run_chains(ds, cfg, {}));
  bundle.manifest.resolved_config = config_json(merged.config);
  bundle.manifest.seed = merged.config.seed;

  const StoredChain stored{ds.x_names, ds.x_kinds, ds.x_levels, ds.y_names,
                           std::move(merged)};
  save_chain(bundle.path_of("chain.bin"), stored);
  bundle.note_artifact("chain.bin");
  bundle.add_json("calibration.json",
                  calibration_json(stored.chain.priors, stored.chain.config,
                                   ds.y_names));
  bundle.add_json("diagnostics.json", diagnostics_json(stored.chain));
  const TraceTable trace = sigma_traces(stored.chain);
  bundle.add_csv("sigma_trace.csv", trace.names, trace.columns);
}

// ---- predict ----

struct PredictOptions {
  std::string chain_path, data_path, out_dir;
  double level = 0.95;
  std::uint64_t seed = 0;
};

void cmd_predict(OutputBundle& bundle, const CLI::App* sub,
                 const PredictOptions& opt) {
  if (!(opt.level > 0.0 && opt.level < 1.0))
    fail(ErrorCode::InvalidConfig, "interval level must be in (0,1)");
  bundle.add_input(opt.chain_path);
  const StoredChain stored = load_chain(opt.chain_path);
  bundle.manifest.resolved_config = config_json(stored.chain.config);

  bundle.add_input(opt.data_path);
  const CsvTable table = read_csv(opt.data_path);
  std::vector<std::vector<double>> x_new;
  x_new.reserve(stored.x_names.size());
  for (const auto& name : stored.x_names)
    x_new.push_back(require_column(table, name));
  Dataset schema;
  schema.x_names = stored.x_names;
  schema.x_kinds = stored.x_kinds;
  schema.x_levels = stored.x_levels;
  schema.x = x_new;
  validate_covariates_against(schema, x_new, stored.x_kinds, stored.x_levels);

  const std::uint64_t seed =
      sub->count("--seed") ? opt.seed : stored.chain.config.seed;
  bundle.manifest.seed = seed;

  const std::vector<Matrix> fits = evaluate_forests(stored.chain, x_new);
  PredictiveSummary summary;
  if (stored.chain.config.mode == Mode::Continuous) {
    // Point predictions from the fits alone; interval endpoints from the
    // full predictive draws, noise included.
    const auto clean =
        predictive_draws_continuous(stored.chain, fits, 0, false);
    const auto noisy = predictive_draws_continuous(
        stored.chain, fits, splitmix64(seed ^ splitmix64(7300)), true);
    summary = summarize_draws(noisy, opt.level);
    summary.mean = summarize_draws(clean, opt.level).mean;
  } else {
    summary = summarize_draws(probability_draws_probit(fits), opt.level);
  }

  const int n = static_cast<int>(summary.mean.rows());
  const int d = static_cast<int>(summary.mean.cols());
  std::vector<std::vector<double>> cols(5);
  for (auto& col : cols) col.reserve(static_cast<std::size_t>(n) * d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      cols[0].push_back(i + 1);
      cols[1].push_back(j + 1);
      cols[2].push_back(summary.mean(i, j));
      cols[3].push_back(summary.lo(i, j));
      cols[4].push_back(summary.hi(i, j));
    }
  bundle.add_csv("predictions.csv", {"row", "outcome", "mean", "lo", "hi"},
                 cols);
}

// ---- cea ----

struct CeaOptions {
  std::string data_path, out_dir;
  std::string treatment_col, cost_col, effect_col;
  std::vector<std::string> categorical, drop;
  std::string ps = "on";
  std::vector<double> lambdas{20000.0, 50000.0};
  double level = 0.95;
  ConfigFlags flags;
};

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

void cmd_cea(OutputBundle& bundle, const CLI::App* sub,
             const CeaOptions& opt) {
  if (!(opt.level > 0.0 && opt.level < 1.0))
    fail(ErrorCode::InvalidConfig, "interval level must be in (0,1)");
  if (opt.treatment_col == opt.cost_col ||
      opt.treatment_col == opt.effect_col)
    fail(ErrorCode::InvalidArgument,
         "treatment column cannot be an outcome column");
  for (double lambda : opt.lambdas)
    if (!(lambda >= 0.0))
      fail(ErrorCode::InvalidArgument,
           "willingness-to-pay values must be nonnegative");

  bundle.add_input(opt.data_path);
  const CsvTable table = read_csv(opt.data_path);
  const std::vector<double> treatment = require_column(table, opt.treatment_col);
  std::vector<std::string> exclude = opt.drop;
  exclude.push_back(opt.treatment_col);
  const Dataset ds = dataset_from_table(
      table, {opt.cost_col, opt.effect_col}, opt.categorical, exclude);

  ModelConfig cfg = build_config(sub, opt.flags, bundle);
  if (sub->count("--independence")) cfg.independence = true;
  cfg.store_forests = false;  // importance is accumulated during the run
  const bool with_ps = opt.ps == "on";

  const CeaFit fit = cea_fit(ds, treatment, cfg, with_ps, cfg.seed);
  bundle.manifest.resolved_config = config_json(fit.chain.config);
  bundle.manifest.seed = cfg.seed;

  const CeaDraws draws = mate_draws(fit);
  const int n_draws = static_cast<int>(draws.delta_c.size());

  std::vector<double> draw_index(n_draws);
  for (int k = 0; k < n_draws; ++k) draw_index[k] = k + 1;
  bundle.add_csv("cep_draws.csv", {"draw", "delta_c", "delta_q"},
                 {draw_index, draws.delta_c, draws.delta_q});

  std::vector<double> grid = default_lambda_grid();
  grid.insert(grid.end(), opt.lambdas.begin(), opt.lambdas.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const auto curve = ceac(draws, grid);
  std::vector<double> grid_col, prob_col;
  for (const auto& pt : curve) {
    grid_col.push_back(pt.lambda);
    prob_col.push_back(pt.probability);
  }
  bundle.add_csv("ceac.csv", {"lambda", "probability"},
                 {grid_col, prob_col});

  // Posterior moments of the effect draws, for the closed-form
  // cost-effectiveness probability alongside the draw-counting one.
  const double mean_dc = mean_of(draws.delta_c);
  const double mean_dq = mean_of(draws.delta_q);
  double var_dc = 0.0, var_dq = 0.0, cov = 0.0;
  for (int k = 0; k < n_draws; ++k) {
    var_dc += (draws.delta_c[k] - mean_dc) * (draws.delta_c[k] - mean_dc);
    var_dq += (draws.delta_q[k] - mean_dq) * (draws.delta_q[k] - mean_dq);
    cov += (draws.delta_c[k] - mean_dc) * (draws.delta_q[k] - mean_dq);
  }
  var_dc /= n_draws - 1;
  var_dq /= n_draws - 1;
  cov /= n_draws - 1;

  const Interval ci_c = quantile_interval(draws.delta_c, opt.level);
  const Interval ci_q = quantile_interval(draws.delta_q, opt.level);
  json inb_entries = json::array();
  for (double lambda : opt.lambdas) {
    const std::vector<double> inb = inb_draws(draws, lambda);
    const Interval ci = quantile_interval(inb, opt.level);
    int positive = 0;
    for (double v : inb) positive += v > 0.0 ? 1 : 0;
    json entry{{"lambda", lambda},
               {"mean", mean_of(inb)},
               {"lo", ci.lo},
               {"hi", ci.hi},
               {"p_ce", static_cast<double>(positive) / n_draws}};
    try {
      entry["p_ce_normal"] = normal_theory_ce_probability(
          mean_dq, mean_dc, var_dq, var_dc, cov, lambda);
    } catch (const Error&) {
      // Degenerate draws have no normal-theory summary; omit the field.
    }
    inb_entries.push_back(entry);
  }
  bundle.add_json(
      "summary.json",
      json{{"n", ds.n()},
           {"draws", n_draws},
           {"propensity_adjusted", with_ps},
           {"interval_level", opt.level},
           {"cost_column", opt.cost_col},
           {"effect_column", opt.effect_col},
           {"design_columns", fit.design_columns},
           {"delta_c", {{"mean", mean_dc}, {"lo", ci_c.lo}, {"hi", ci_c.hi}}},
           {"delta_q", {{"mean", mean_dq}, {"lo", ci_q.lo}, {"hi", ci_q.hi}}},
           {"inb", inb_entries}});

  std::vector<std::string> imp_names{"outcome"};
  std::vector<std::vector<double>> imp_cols{{1.0, 2.0}};
  for (std::size_t c = 0; c < fit.design_columns.size(); ++c) {
    imp_names.push_back(fit.design_columns[c]);
    imp_cols.push_back({fit.chain.importance(0, static_cast<int>(c)),
                        fit.chain.importance(1, static_cast<int>(c))});
  }
  bundle.add_csv("importance.csv", imp_names, imp_cols);

  if (with_ps) {
    std::vector<double> row_index(fit.propensity.size());
    for (std::size_t i = 0; i < row_index.size(); ++i) row_index[i] = i + 1;
    bundle.add_csv("propensity.csv", {"row", "propensity"},
                   {row_index, fit.propensity});
  }

  const TraceTable trace = sigma_traces(fit.chain);
  bundle.add_csv("sigma_trace.csv", trace.names, trace.columns);
}

// ---- simulate ----

struct SimulateOptions {
  std::string scenario, out_dir;
  int d = 2, n_train = 1000, n_test = 1000, replicates = 1, threads = 1;
  double rho = -0.25;
  std::string variants = "subart,ind-bart";
  bool emit_data = false;
  ConfigFlags flags;
};

std::vector<std::string> split_variants(const std::string& joined) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : joined) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

void emit_dataset_csv(OutputBundle& bundle, const std::string& name,
                      const Dataset& ds,
                      const std::vector<std::string>& extra_names,
                      const std::vector<std::vector<double>>& extra_cols) {
  std::vector<std::string> names = ds.x_names;
  names.insert(names.end(), ds.y_names.begin(), ds.y_names.end());
  names.insert(names.end(), extra_names.begin(), extra_names.end());
  std::vector<std::vector<double>> cols = ds.x;
  cols.insert(cols.end(), ds.y.begin(), ds.y.end());
  cols.insert(cols.end(), extra_cols.begin(), extra_cols.end());
  bundle.add_csv(name, names, cols);
}

std::vector<std::vector<double>> matrix_columns(const Matrix& m) {
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(m.cols()));
  for (int j = 0; j < m.cols(); ++j) {
    cols[j].resize(static_cast<std::size_t>(m.rows()));
    for (int i = 0; i < m.rows(); ++i) cols[j][i] = m(i, j);
  }
  return cols;
}

std::vector<std::string> numbered(const std::string& stem, int count) {
  std::vector<std::string> out;
  for (int j = 1; j <= count; ++j) out.push_back(stem + std::to_string(j));
  return out;
}

void emit_scenario_data(OutputBundle& bundle, const ScenarioSpec& spec,
                        int replicates) {
  for (int r = 0; r < replicates; ++r) {
    const auto seeds = replicate_seeds(spec.seed, r);
    const std::string tag = std::to_string(r);
    switch (spec.scenario) {
      case Scenario::Friedman1: {
        const Friedman1Sample train =
            gen_friedman1(spec.n_train, spec.d, seeds[0]);
        const Friedman1Sample test =
            gen_friedman1(spec.n_test, spec.d, seeds[1]);
        emit_dataset_csv(bundle, "train_rep" + tag + ".csv", train.data, {},
                         {});
        emit_dataset_csv(bundle, "test_rep" + tag + ".csv", test.data,
                         numbered("mean", spec.d),
                         matrix_columns(test.true_mean));
        break;
      }
      case Scenario::Friedman2: {
        const Friedman2Sample train =
            gen_friedman2(spec.n_train, spec.d, seeds[0]);
        const Friedman2Sample test =
            gen_friedman2(spec.n_test, spec.d, seeds[1]);
        emit_dataset_csv(bundle, "train_rep" + tag + ".csv", train.data, {},
                         {});
        emit_dataset_csv(bundle, "test_rep" + tag + ".csv", test.data,
                         numbered("prob", spec.d),
                         matrix_columns(test.probability));
        break;
      }
      case Scenario::TtcmLike: {
        const TtcmSample sample = gen_ttcm(spec.n_train, spec.rho, seeds[0]);
        emit_dataset_csv(bundle, "data_rep" + tag + ".csv", sample.data,
                         {"treatment", "propensity", "tau_c", "tau_q"},
                         {sample.treatment, sample.propensity, sample.tau_c,
                          sample.tau_q});
        break;
      }
    }
  }
}

void cmd_simulate(OutputBundle& bundle, const CLI::App* sub,
                  const SimulateOptions& opt) {
  ScenarioSpec spec;
  spec.scenario = parse_scenario(opt.scenario);
  spec.n_train = opt.n_train;
  spec.n_test = opt.n_test;
  spec.d = opt.d;
  spec.rho = opt.rho;

  const ModelConfig cfg = build_config(sub, opt.flags, bundle);
  spec.seed = cfg.seed;
  bundle.manifest.seed = spec.seed;
  bundle.manifest.resolved_config =
      json{{"model", config_json(cfg)},
           {"scenario",
            {{"name", scenario_name(spec.scenario)},
             {"n_train", spec.n_train},
             {"n_test", spec.n_test},
             {"d", spec.d},
             {"rho", spec.rho},
             {"seed", spec.seed},
             {"replicates", opt.replicates},
             {"variants", opt.variants},
             {"threads", opt.threads}}}};

  const std::vector<std::string> variants = split_variants(opt.variants);
  const auto rows =
      run_replicates(spec, variants, opt.replicates, cfg, opt.threads);

  std::vector<std::vector<std::string>> metric_rows;
  json failures = json::array();
  for (const auto& row : rows) {
    if (!row.error.empty()) {
      failures.push_back({{"replicate", row.replicate},
                          {"variant", row.variant},
                          {"error", row.error}});
      continue;
    }
    for (const auto& m : row.metrics)
      metric_rows.push_back({std::to_string(row.replicate), row.variant,
                             m.first, format_double(m.second)});
  }
  bundle.add_table("metrics.csv", {"replicate", "variant", "metric", "value"},
                   metric_rows);

  json summaries = json::array();
  for (const auto& s : summarize_metrics(rows)) {
    json entry{{"variant", s.variant},
               {"metric", s.name},
               {"replicates", s.replicates},
               {"mean", s.mean},
               {"sd", s.sd}};
    if (s.estimand) {
      entry["bias"] = s.bias;
      entry["rmse"] = s.rmse;
    }
    if (s.has_interval) {
      entry["ci_cover"] = s.ci_cover;
      entry["ci_width"] = s.ci_width;
    }
    summaries.push_back(entry);
  }
  bundle.add_json("summary.json",
                  json{{"metrics", summaries}, {"failures", failures}});

  if (opt.emit_data) emit_scenario_data(bundle, spec, opt.replicates);
}

// ---- calibrate ----

struct CalibrateOptions {
  std::string data_path, out_dir;
  std::vector<std::string> y_names, categorical, drop;
  ConfigFlags flags;
};

void cmd_calibrate(OutputBundle& bundle, const CLI::App* sub,
                   const CalibrateOptions& opt) {
  bundle.add_input(opt.data_path);
  const CsvTable table = read_csv(opt.data_path);
  const Dataset ds =
      dataset_from_table(table, opt.y_names, opt.categorical, opt.drop);

  ModelConfig cfg = build_config(sub, opt.flags, bundle);
  if (sub->count("--mode")) set_mode(cfg, opt.flags.mode);
  const Mode mode = cfg.mode_declared ? cfg.mode : infer_mode(ds);
  validate_dataset(ds, mode);
  cfg.resolve(mode, ds.n(), ds.d());
  bundle.manifest.resolved_config = config_json(cfg);
  bundle.manifest.seed = cfg.seed;

  CalibratedPriors priors;
  if (mode == Mode::Continuous) {
    const OutcomeScaler scaler = OutcomeScaler::fit(ds.y);
    priors = calibrate_priors(ds, cfg, &scaler);
  } else {
    priors = calibrate_priors(ds, cfg, nullptr);
  }
  bundle.add_json("calibration.json",
                  calibration_json(priors, cfg, ds.y_names));
}

// ---- diagnose ----

struct DiagnoseOptions {
  std::string chain_path, out_dir;
};

void cmd_diagnose(OutputBundle& bundle, const DiagnoseOptions& opt) {
  bundle.add_input(opt.chain_path);
  const StoredChain stored = load_chain(opt.chain_path);
  bundle.manifest.resolved_config = config_json(stored.chain.config);
  bundle.manifest.seed = stored.chain.config.seed;
  bundle.add_json("diagnostics.json", diagnostics_json(stored.chain));
  const TraceTable trace = sigma_traces(stored.chain);
  bundle.add_csv("sigma_trace.csv", trace.names, trace.columns);
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Multi-outcome Bayesian additive regression trees"};
  app.require_subcommand(1);

  FitOptions fit_opt;
  CLI::App* fit = app.add_subcommand("fit", "Fit a model to a CSV dataset");
  fit->add_option("--data", fit_opt.data_path, "training CSV")->required();
  fit->add_option("--out", fit_opt.out_dir, "output directory")->required();
  fit->add_option("--y", fit_opt.y_names, "outcome column names")->required();
  fit->add_option("--categorical", fit_opt.categorical,
                  "covariate columns holding integer level codes");
  fit->add_option("--drop", fit_opt.drop, "columns to leave out of the model");
  add_config_flags(fit, fit_opt.flags);
  add_mode_flag(fit, fit_opt.flags);
  fit->add_flag("--independence", fit_opt.flags.independence,
                "diagonal error covariance");
  fit->add_option("--chains", fit_opt.flags.n_chains,
                  "independent chains to concatenate");
  fit->add_flag("--no-forests", fit_opt.flags.no_forests,
                "skip storing per-draw forests");

  PredictOptions pred_opt;
  CLI::App* predict =
      app.add_subcommand("predict", "Evaluate a stored chain on new rows");
  predict->add_option("--chain", pred_opt.chain_path, "chain file")
      ->required();
  predict->add_option("--data", pred_opt.data_path, "covariate CSV")
      ->required();
  predict->add_option("--out", pred_opt.out_dir, "output directory")
      ->required();
  predict->add_option("--level", pred_opt.level,
                      "predictive interval level, e.g. 0.5 for quartiles");
  predict->add_option("--seed", pred_opt.seed,
                      "noise stream seed (defaults to the chain seed)");

  CeaOptions cea_opt;
  CLI::App* cea = app.add_subcommand(
      "cea", "Cost-effectiveness analysis of a treatment indicator");
  cea->add_option("--data", cea_opt.data_path, "trial CSV")->required();
  cea->add_option("--out", cea_opt.out_dir, "output directory")->required();
  cea->add_option("--treatment-col", cea_opt.treatment_col,
                  "binary treatment column")
      ->required();
  cea->add_option("--cost-col", cea_opt.cost_col, "cost outcome column")
      ->required();
  cea->add_option("--effect-col", cea_opt.effect_col,
                  "effectiveness outcome column")
      ->required();
  cea->add_option("--categorical", cea_opt.categorical,
                  "covariate columns holding integer level codes");
  cea->add_option("--drop", cea_opt.drop, "columns to leave out of the model");
  cea->add_option("--ps", cea_opt.ps,
                  "augment covariates with an estimated propensity score")
      ->check(CLI::IsMember({"on", "off"}));
  cea->add_option("--lambda", cea_opt.lambdas,
                  "willingness-to-pay values for INB summaries");
  cea->add_option("--level", cea_opt.level, "credible interval level");
  add_config_flags(cea, cea_opt.flags);
  cea->add_flag("--independence", cea_opt.flags.independence,
                "diagonal error covariance");

  SimulateOptions sim_opt;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Replicated benchmark runs with known truths");
  simulate->add_option("--scenario", sim_opt.scenario,
                       "friedman1, friedman2, or ttcm_like")
      ->required();
  simulate->add_option("--out", sim_opt.out_dir, "output directory")
      ->required();
  simulate->add_option("--d", sim_opt.d, "outcome count");
  simulate->add_option("--n", sim_opt.n_train, "training rows");
  simulate->add_option("--n-test", sim_opt.n_test, "test rows");
  simulate->add_option("--rho", sim_opt.rho,
                       "error correlation (ttcm_like only)");
  simulate->add_option("--replicates", sim_opt.replicates,
                       "independent replicates");
  simulate->add_option("--variants", sim_opt.variants,
                       "comma-separated model variants");
  simulate->add_option("--threads", sim_opt.threads,
                       "worker threads across replicates");
  simulate->add_flag("--emit-data", sim_opt.emit_data,
                     "also write the generated datasets");
  add_config_flags(simulate, sim_opt.flags);

  CalibrateOptions cal_opt;
  CLI::App* calibrate = app.add_subcommand(
      "calibrate", "Report the data-driven prior settings for a dataset");
  calibrate->add_option("--data", cal_opt.data_path, "training CSV")
      ->required();
  calibrate->add_option("--out", cal_opt.out_dir, "output directory")
      ->required();
  calibrate->add_option("--y", cal_opt.y_names, "outcome column names")
      ->required();
  calibrate->add_option("--categorical", cal_opt.categorical,
                        "covariate columns holding integer level codes");
  calibrate->add_option("--drop", cal_opt.drop,
                        "columns to leave out of the model");
  add_config_flags(calibrate, cal_opt.flags);
  add_mode_flag(calibrate, cal_opt.flags);

  DiagnoseOptions diag_opt;
  CLI::App* diagnose =
      app.add_subcommand("diagnose", "Summarize a stored chain");
  diagnose->add_option("--chain", diag_opt.chain_path, "chain file")
      ->required();
  diagnose->add_option("--out", diag_opt.out_dir, "output directory")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (app.got_subcommand(fit))
    return execute_command("fit", fit_opt.out_dir, [&](OutputBundle& b) {
      cmd_fit(b, fit, fit_opt);
    });
  if (app.got_subcommand(predict))
    return execute_command("predict", pred_opt.out_dir,
                           [&](OutputBundle& b) {
                             cmd_predict(b, predict, pred_opt);
                           });
  if (app.got_subcommand(cea))
    return execute_command("cea", cea_opt.out_dir, [&](OutputBundle& b) {
      cmd_cea(b, cea, cea_opt);
    });
  if (app.got_subcommand(simulate))
    return execute_command("simulate", sim_opt.out_dir,
                           [&](OutputBundle& b) {
                             cmd_simulate(b, simulate, sim_opt);
                           });
  if (app.got_subcommand(calibrate))
    return execute_command("calibrate", cal_opt.out_dir,
                           [&](OutputBundle& b) {
                             cmd_calibrate(b, calibrate, cal_opt);
                           });
  if (app.got_subcommand(diagnose))
    return execute_command("diagnose", diag_opt.out_dir,
                           [&](OutputBundle& b) {
                             cmd_diagnose(b, diag_opt);
                           });
  return 2;
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.push_back("surt");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const auto& s : full) argv.push_back(s.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace surt
