// Command-line driver: training runs, evaluation, fraction x seed sweeps,
// and the verification suites.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "setemb/checks.hpp"
#include "setemb/graph.hpp"
#include "setemb/model.hpp"
#include "setemb/report.hpp"
#include "setemb/spectral.hpp"

namespace fs = std::filesystem;
using namespace setemb;

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("file not found: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("short write to " + path.string());
}

std::string dataset_name_from(const std::string& edges_path) {
  return fs::path(edges_path).stem().string();
}

/// Reuses the cached eigendecomposition when the adjacency hash and rank
/// match; recomputes and refreshes the cache otherwise.
SpectralBasis basis_for(const Graph& g, int rank, const fs::path& cache_dir) {
  const int r = std::min(rank, g.n);
  const std::uint64_t hash = adjacency_hash(g);
  char name[64];
  std::snprintf(name, sizeof(name), "basis-%016llx-r%d.bin",
                static_cast<unsigned long long>(hash), r);
  const fs::path cache = cache_dir / name;
  if (auto cached = load_basis(hash, r, cache.string())) {
    std::fprintf(stderr, "spectral basis: reusing cache %s\n",
                 cache.string().c_str());
    return *cached;
  }
  std::fprintf(stderr, "spectral basis: decomposing %d x %d adjacency (rank %d)\n",
               g.n, g.n, r);
  SpectralBasis b = eigh_truncated(adjacency(g), r);
  fs::create_directories(cache_dir);
  save_basis(b, hash, cache.string());
  return b;
}

struct DatasetArgs {
  std::string edges;
  std::string types;
  std::string labels;
  std::string mode = "multiclass";

  Graph load() const {
    std::optional<std::string> type_path;
    if (!types.empty()) type_path = types;
    return load_graph(edges, type_path, labels, label_mode_from_string(mode));
  }
};

void add_dataset_flags(CLI::App* cmd, DatasetArgs& args) {
  cmd->add_option("--edges", args.edges, "edge list file")->required();
  cmd->add_option("--types", args.types, "node type file (optional)");
  cmd->add_option("--labels", args.labels, "label file")->required();
  cmd->add_option("--mode", args.mode, "multiclass or multilabel")
      ->check(CLI::IsMember({"multiclass", "multilabel"}));
}

void write_report(const MetricsReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "metrics.json", report.to_json().dump(2) + "\n");
  write_text(out_dir / "metrics.csv", report.to_csv());
}

int run_train(const DatasetArgs& data, const std::string& config_path,
              double frac, long long seed, const std::string& out,
              std::optional<int> rank, std::optional<int> epochs) {
  const Graph g = data.load();
  TrainConfig cfg = default_config(g.mode, g.num_types);
  if (!config_path.empty()) {
    const auto j = read_json_file(config_path);
    cfg = config_from_json(j, cfg);
    if (cfg.mode != g.mode)
      throw ConfigError("config mode does not match --mode");
  }
  cfg.seed = static_cast<std::uint64_t>(seed);
  if (rank) cfg.rank = *rank;
  if (epochs) cfg.epochs = *epochs;
  cfg = validated_config(cfg, g);

  const Split split = make_split(g, frac, static_cast<std::uint64_t>(seed));
  const fs::path out_dir(out);
  fs::create_directories(out_dir);
  const SpectralBasis basis = basis_for(g, cfg.rank, out_dir);

  TrainResult tr = train(g, split, cfg, basis);
  const Metrics metrics = evaluate(tr.model, g, split);

  MetricsReport report;
  const std::string name = dataset_name_from(data.edges);
  for (const auto& [metric, value] : metrics)
    report.add(name, frac, seed, metric, value);
  write_report(report, out_dir);
  write_text(out_dir / "model.ckpt",
             model_to_checkpoint(tr.model, cfg, adjacency_hash(g)).dump() + "\n");

  std::printf("trained %s: %d nodes, %zu edges, %d epochs\n", name.c_str(),
              g.n, g.edges.size(), cfg.epochs);
  std::printf("final epoch loss %.6f\n", tr.history.back());
  for (const auto& [metric, value] : metrics)
    std::printf("%s = %.4f\n", metric.c_str(), value);
  return 0;
}

int run_eval(const DatasetArgs& data, const std::string& model_path,
             double frac, long long seed, const std::string& out) {
  const Graph g = data.load();
  auto [model, cfg] = model_from_checkpoint(read_json_file(model_path), g);
  (void)cfg;
  const Split split = make_split(g, frac, static_cast<std::uint64_t>(seed));
  const Metrics metrics = evaluate(model, g, split);
  MetricsReport report;
  const std::string name = dataset_name_from(data.edges);
  for (const auto& [metric, value] : metrics)
    report.add(name, frac, seed, metric, value);
  if (!out.empty()) write_report(report, out);
  for (const auto& [metric, value] : metrics)
    std::printf("%s = %.4f\n", metric.c_str(), value);
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& out_override) {
  const auto spec = read_json_file(config_path);
  for (const auto& key :
       {"edges", "labels", "fractions", "seeds"})
    if (!spec.contains(key))
      throw ConfigError(std::string("sweep spec missing key: ") + key);

  DatasetArgs data;
  data.edges = spec.at("edges").get<std::string>();
  data.labels = spec.at("labels").get<std::string>();
  if (spec.contains("types") && !spec.at("types").is_null())
    data.types = spec.at("types").get<std::string>();
  if (spec.contains("mode")) data.mode = spec.at("mode").get<std::string>();
  const Graph g = data.load();

  const auto fractions = spec.at("fractions").get<std::vector<double>>();
  const auto seeds = spec.at("seeds").get<std::vector<long long>>();
  if (fractions.empty() || seeds.empty())
    throw ConfigError("sweep spec needs non-empty fractions and seeds");
  for (double f : fractions)
    if (!(f > 0.0 && f < 1.0))
      throw ConfigError("sweep fractions must be in (0,1)");

  TrainConfig base = default_config(g.mode, g.num_types);
  if (spec.contains("train")) base = config_from_json(spec.at("train"), base);
  const std::string name = spec.contains("dataset")
                               ? spec.at("dataset").get<std::string>()
                               : dataset_name_from(data.edges);
  const fs::path out_dir(!out_override.empty()
                             ? out_override
                             : spec.value("out", std::string("sweep-out")));
  fs::create_directories(out_dir);

  TrainConfig probe = validated_config(base, g);
  const SpectralBasis basis = basis_for(g, probe.rank, out_dir);

  MetricsReport report;
  nlohmann::json failures = nlohmann::json::array();
  for (double frac : fractions) {
    for (long long seed : seeds) {
      try {
        TrainConfig cfg = base;
        cfg.seed = static_cast<std::uint64_t>(seed);
        cfg = validated_config(cfg, g);
        const Split split =
            make_split(g, frac, static_cast<std::uint64_t>(seed));
        TrainResult tr = train(g, split, cfg, basis);
        for (const auto& [metric, value] : evaluate(tr.model, g, split))
          report.add(name, frac, seed, metric, value);
        std::fprintf(stderr, "cell frac=%g seed=%lld done\n", frac, seed);
      } catch (const std::exception& e) {
        nlohmann::json f;
        f["fraction"] = frac;
        f["seed"] = seed;
        f["error"] = e.what();
        failures.push_back(std::move(f));
        std::fprintf(stderr, "cell frac=%g seed=%lld FAILED: %s\n", frac, seed,
                     e.what());
      }
    }
  }

  nlohmann::json j = report.to_json();
  if (!failures.empty()) j["failures"] = failures;
  write_text(out_dir / "metrics.json", j.dump(2) + "\n");
  write_text(out_dir / "metrics.csv", report.to_csv());

  for (const auto& a : report.aggregates())
    std::printf("%s frac=%g %s: %.4f +/- %.4f (n=%d)\n", a.dataset.c_str(),
                a.fraction, a.metric.c_str(), a.mean, a.std_dev, a.n);
  return failures.empty() ? 0 : 1;
}

int run_checks(const std::string& suite, const std::string& out,
               long long seed, bool json_to_stdout) {
  std::vector<std::pair<std::string, CheckList>> suites;
  const auto useed = static_cast<std::uint64_t>(seed);
  if (suite == "oracle" || suite == "all")
    suites.emplace_back("oracle", oracle_battery(useed));
  if (suite == "spectral" || suite == "all")
    suites.emplace_back("spectral", spectral_battery(useed));
  if (suite == "grad" || suite == "all")
    suites.emplace_back("grad", grad_battery(useed));
  if (suite == "represent" || suite == "all")
    suites.emplace_back("represent", represent_battery(useed));
  if (suites.empty())
    throw UsageError("unknown suite: " + suite +
                     " (expected oracle, grad, spectral, represent or all)");

  bool ok = true;
  nlohmann::json jsuites = nlohmann::json::array();
  for (const auto& [sname, checks] : suites) {
    print_checks(checks, json_to_stdout ? stderr : stdout);
    ok = ok && all_pass(checks);
    jsuites.push_back(checks_to_json(sname, checks));
  }
  nlohmann::json j;
  j["suites"] = std::move(jsuites);
  j["all_pass"] = ok;
  if (!out.empty()) write_text(out, j.dump(2) + "\n");
  if (json_to_stdout) std::printf("%s\n", j.dump(2).c_str());
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"set-function graph embeddings: training, evaluation and "
               "verification suites"};
  app.require_subcommand(1);

  DatasetArgs train_data;
  std::string train_config, train_out;
  double train_frac = 0.5;
  long long train_seed = 0;
  int train_rank = -1, train_epochs = -1;
  auto* cmd_train = app.add_subcommand("train", "train a model");
  add_dataset_flags(cmd_train, train_data);
  cmd_train->add_option("--config", train_config, "training config JSON");
  cmd_train->add_option("--frac", train_frac, "train fraction of labeled nodes");
  cmd_train->add_option("--seed", train_seed, "split and training seed");
  cmd_train->add_option("--out", train_out, "output directory")->required();
  cmd_train->add_option("--rank", train_rank, "spectral rank override");
  cmd_train->add_option("--epochs", train_epochs, "epoch count override");

  DatasetArgs eval_data;
  std::string eval_model, eval_out;
  double eval_frac = 0.5;
  long long eval_seed = 0;
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_dataset_flags(cmd_eval, eval_data);
  cmd_eval->add_option("--model", eval_model, "model checkpoint")->required();
  cmd_eval->add_option("--frac", eval_frac, "train fraction of labeled nodes");
  cmd_eval->add_option("--seed", eval_seed, "split seed");
  cmd_eval->add_option("--out", eval_out, "output directory (optional)");

  std::string sweep_config, sweep_out;
  auto* cmd_sweep = app.add_subcommand("sweep", "fraction x seed grid");
  cmd_sweep->add_option("--config", sweep_config, "experiment spec JSON")
      ->required();
  cmd_sweep->add_option("--out", sweep_out, "output directory override");

  std::string checks_suite, checks_out;
  long long checks_seed = 0;
  auto* cmd_checks = app.add_subcommand("checks", "run a verification suite");
  cmd_checks->add_option("--suite", checks_suite, "oracle|grad|spectral|represent|all")
      ->required();
  cmd_checks->add_option("--out", checks_out, "JSON report path");
  cmd_checks->add_option("--seed", checks_seed, "battery seed");

  std::string oc_out;
  long long oc_seed = 0;
  auto* cmd_oc = app.add_subcommand(
      "oracle-check", "run the set-function battery, JSON report on stdout");
  cmd_oc->add_option("--out", oc_out, "JSON report path");
  cmd_oc->add_option("--seed", oc_seed, "battery seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_train->parsed())
      return run_train(train_data, train_config, train_frac, train_seed,
                       train_out,
                       train_rank > 0 ? std::optional<int>(train_rank)
                                      : std::nullopt,
                       train_epochs > 0 ? std::optional<int>(train_epochs)
                                        : std::nullopt);
    if (cmd_eval->parsed())
      return run_eval(eval_data, eval_model, eval_frac, eval_seed, eval_out);
    if (cmd_sweep->parsed()) return run_sweep(sweep_config, sweep_out);
    if (cmd_checks->parsed())
      return run_checks(checks_suite, checks_out, checks_seed, false);
    if (cmd_oc->parsed()) return run_checks("oracle", oc_out, oc_seed, true);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const ArgumentError& e) {
    std::fprintf(stderr, "argument error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 1;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "training error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
