// privaug command-line tool: train, augment, eval, trials, pools fill, bench make.
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "privaug/augment.hpp"
#include "privaug/eval.hpp"
#include "privaug/pii.hpp"

using namespace privaug;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRemote = 3;

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string required_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_string()) throw DataError(where + ": missing string field '" + key + "'");
  return j.at(key).get<std::string>();
}

std::uint64_t required_seed(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number_unsigned())
    throw DataError(where + ": missing non-negative integer field '" + key + "'");
  return j.at(key).get<std::uint64_t>();
}

struct ParserFlags {
  ParserConfig cfg;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--prior-order", cfg.prior_order, "n-gram order of the canonical prior")->capture_default_str();
    cmd->add_option("--prior-alpha", cfg.prior_alpha, "additive smoothing of the prior")->capture_default_str();
    cmd->add_option("--em-iterations", cfg.em_iterations, "Model 1 EM iterations")->capture_default_str();
    cmd->add_option("--beam-width", cfg.beam_width, "parser beam width")->capture_default_str();
    cmd->add_option("--max-symbols", cfg.max_symbols, "grammar symbols per parse")->capture_default_str();
    cmd->add_option("--max-slot-span", cfg.max_slot_span, "longest unknown span offered as a slot value")
        ->capture_default_str();
  }
};

// train

struct TrainArgs {
  fs::path grammar, pools, data, out;
  ParserFlags parser;
};

void run_train(const TrainArgs& a) {
  const auto grammar = load_grammar_file(a.grammar);
  const auto pools = load_pools(a.pools);
  const auto data = read_pairs_jsonl(a.data);
  const auto parser = train_parser(data, grammar, pools, a.parser.cfg);
  parser.save(a.out);
  spdlog::info("trained on {} pairs, wrote {}", data.size(), a.out.string());
}

// eval

struct EvalArgs {
  fs::path grammar, pools, parser, test;
};

void run_eval(const EvalArgs& a) {
  const auto parser = NoisyChannelParser::load(a.parser, load_grammar_file(a.grammar), load_pools(a.pools));
  const auto test = read_pairs_jsonl(a.test);
  std::printf("top-1: %.2f (%zu pairs)\n", top1_match(parser, test), test.size());
}

// augment

struct AugmentArgs {
  fs::path config;
  std::optional<fs::path> parser_out;
};

std::unique_ptr<CompletionBackend> make_backend(const json& j, const fs::path& base, const MethodConfig& method) {
  const std::string where = "augment config 'backend'";
  const auto type = required_string(j, "type", where);
  if (type == "remote")
    return std::make_unique<RemoteClient>(RemoteConfig::from_environment(required_string(j, "endpoint", where)));
  if (type == "simulator") {
    auto sim = method.simulator;
    sim.seed = required_seed(j, "seed", where);
    const auto background = read_unlabeled_jsonl(resolve(base, required_string(j, "background", where)));
    return std::make_unique<SimulatorBackend>(background.utterances, sim);
  }
  throw DataError(where + ": unknown type '" + type + "'");
}

void run_augment(const AugmentArgs& a) {
  const auto j = read_json_file(a.config);
  const auto base = a.config.parent_path();
  const std::string where = "augment config";
  if (!j.contains("method") || !j.at("method").is_object()) throw DataError(where + ": missing object 'method'");
  if (!j.contains("backend") || !j.at("backend").is_object()) throw DataError(where + ": missing object 'backend'");
  const auto method = MethodConfig::from_json(j.at("method").dump());
  if (method.baseline) throw DataError(where + ": a baseline method does not augment");

  auto grammar = load_grammar_file(resolve(base, required_string(j, "grammar", where)));
  auto pools = load_pools(resolve(base, required_string(j, "pools", where)));
  auto seed = SeedDataset::from_pairs(grammar, read_pairs_jsonl(resolve(base, required_string(j, "seed", where))));
  auto unlabeled = read_unlabeled_jsonl(resolve(base, required_string(j, "unlabeled", where)));

  auto cfg = method.pipeline;
  cfg.rng_seed = required_seed(j, "rng_seed", where);
  if (j.contains("state_dir")) cfg.state_dir = resolve(base, required_string(j, "state_dir", where));
  auto backend = make_backend(j.at("backend"), base, method);

  auto state = initial_state(std::move(grammar), std::move(pools), std::move(seed), std::move(unlabeled), cfg.parser);
  for (int i = 0; i < method.iterations; ++i) {
    state = run_iteration(state, cfg, *backend);
    const auto& r = state.reports.back();
    std::printf("iteration %d: %zu canonicals, %zu simulated, %zu accepted, %zu silver total\n", r.iteration,
                r.canonicals, r.simulated, r.accepted, r.silver_total);
  }
  if (a.parser_out) state.parser.save(*a.parser_out);
}

// trials

struct TrialsArgs {
  fs::path bench;
  std::vector<fs::path> methods;
  std::size_t n = 5;
  std::uint64_t base_seed = 0;
  fs::path out;
};

void run_trials_cmd(const TrialsArgs& a) {
  const auto bench = load_benchmark(BenchmarkSpec::from_json_file(a.bench));
  std::vector<TrialReport> reports;
  for (const auto& path : a.methods) {
    const auto method = MethodConfig::from_json_file(path);
    reports.push_back(run_trials(bench, method, a.n, a.base_seed));
    write_text(a.out / (method.name + ".json"), reports.back().to_json());
  }
  std::printf("%-28s %8s %8s %9s %10s\n", "method", "mean", "std", "t", "p");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    std::printf("%-28s %8.2f %8.2f", r.method.c_str(), r.mean, r.stddev);
    if (i == 0) {
      std::printf(" %9s %10s\n", "-", "-");
      continue;
    }
    try {
      const auto t = paired_ttest(r.top1, reports[0].top1);
      std::printf(" %9.3f %10.4g\n", t.t, t.p);
    } catch (const DataError&) {
      std::printf(" %9s %10s\n", "n/a", "n/a");
    }
  }
}

// pools fill

struct PoolsFillArgs {
  std::string endpoint, category;
  fs::path pools, out;
  std::vector<fs::path> avoid;
  std::uint64_t seed = 0;
  PoolFillParams params;
};

void run_pools_fill(const PoolsFillArgs& a) {
  const auto pools = load_pools(a.pools);
  const auto& examples = pools.values(a.category);
  std::set<Tokens> avoid;
  for (const auto& dir : a.avoid) {
    const auto other = load_pools(dir);
    for (const auto& [category, values] : other.all()) avoid.insert(values.begin(), values.end());
  }
  RemoteClient client(RemoteConfig::from_environment(a.endpoint));
  Rng rng(a.seed);
  auto values = fill_pool(client, a.category, examples, a.params, rng, avoid);
  spdlog::info("{} new '{}' values", values.size(), a.category);
  if (values.size() < a.params.count)
    spdlog::warn("asked for {} values, got {}", a.params.count, values.size());
  ReplacementPools filled;
  auto merged = examples;
  merged.insert(merged.end(), values.begin(), values.end());
  filled.add_category(a.category, std::move(merged));
  save_pools(filled, a.out);
}

// bench make

struct BenchMakeArgs {
  fs::path spec, out;
  std::uint64_t seed = 0;
};

void run_bench_make(const BenchMakeArgs& a) {
  const auto bench = load_benchmark(BenchmarkSpec::from_json_file(a.spec));
  Rng rng(a.seed);
  const auto splits = sample_splits(bench, rng);
  fs::create_directories(a.out);
  write_pairs_jsonl(a.out / "seed.jsonl", splits.seed);
  write_unlabeled_jsonl(a.out / "unlabeled.jsonl", splits.unlabeled());
  write_pairs_jsonl(a.out / "unlabeled_gold.jsonl", splits.unlabeled_gold);
  write_pairs_jsonl(a.out / "test.jsonl", splits.test);
  write_unlabeled_jsonl(a.out / "background.jsonl", UnlabeledSet{splits.background});
  spdlog::info("wrote {} seed, {} unlabeled, {} test and {} background sentences to {}", splits.seed.size(),
               splits.unlabeled_gold.size(), splits.test.size(), splits.background.size(), a.out.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving data augmentation for semantic parsing"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}))
      ->capture_default_str();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a parser on seed pairs");
  train_cmd->add_option("--grammar", train.grammar, "grammar file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--pools", train.pools, "replacement pool directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  train_cmd->add_option("--data", train.data, "pairs (jsonl)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out, "parser file to write")->required();
  train.parser.add_to(train_cmd);

  AugmentArgs augment;
  auto* augment_cmd = app.add_subcommand("augment", "run augmentation iterations from a config file");
  augment_cmd->add_option("config", augment.config, "augment config (json)")->required()->check(CLI::ExistingFile);
  augment_cmd->add_option("--parser-out", augment.parser_out, "write the final parser here");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "top-1 exact match of a parser on a test file");
  eval_cmd->add_option("--grammar", eval.grammar, "grammar file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--pools", eval.pools, "replacement pool directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--parser", eval.parser, "parser file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--test", eval.test, "test pairs (jsonl)")->required()->check(CLI::ExistingFile);

  TrialsArgs trials;
  auto* trials_cmd = app.add_subcommand("trials", "paired multi-trial comparison of methods on a benchmark");
  trials_cmd->add_option("--bench", trials.bench, "benchmark spec (json)")->required()->check(CLI::ExistingFile);
  trials_cmd->add_option("--method", trials.methods, "method file (json); the first is the reference")
      ->required()
      ->check(CLI::ExistingFile);
  trials_cmd->add_option("-n,--trials", trials.n, "trials per method")
      ->capture_default_str()
      ->check(CLI::Range(2, 1000));
  trials_cmd->add_option("--base-seed", trials.base_seed, "seed of the first trial")->required();
  trials_cmd->add_option("--out", trials.out, "directory for TrialReport files")->required();

  PoolsFillArgs fill;
  auto* pools_cmd = app.add_subcommand("pools", "replacement pool maintenance");
  pools_cmd->require_subcommand(1);
  auto* fill_cmd = pools_cmd->add_subcommand("fill", "extend a pool category with values from a remote LM");
  fill_cmd->add_option("--endpoint", fill.endpoint, "completion service base URL")->required();
  fill_cmd->add_option("--pools", fill.pools, "pool directory holding the example values")
      ->required()
      ->check(CLI::ExistingDirectory);
  fill_cmd->add_option("--category", fill.category, "category to extend")->required();
  fill_cmd->add_option("--avoid", fill.avoid, "pool directories whose values must not overlap new ones")
      ->check(CLI::ExistingDirectory);
  fill_cmd->add_option("--count", fill.params.count, "new values wanted")->capture_default_str();
  fill_cmd->add_option("--rounds", fill.params.max_rounds, "request rounds at most")->capture_default_str();
  fill_cmd->add_option("--samples", fill.params.samples_per_round, "completions per round")->capture_default_str();
  fill_cmd->add_option("--temperature", fill.params.temperature, "sampling temperature")->capture_default_str();
  fill_cmd->add_option("--seed", fill.seed, "seed for example ordering")->required();
  fill_cmd->add_option("--out", fill.out, "output pool directory")->required();

  BenchMakeArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "synthetic benchmark tools");
  bench_cmd->require_subcommand(1);
  auto* make_cmd = bench_cmd->add_subcommand("make", "sample benchmark splits and write them to disk");
  make_cmd->add_option("--spec", bench.spec, "benchmark spec (json)")->required()->check(CLI::ExistingFile);
  make_cmd->add_option("--seed", bench.seed, "split sampling seed")->required();
  make_cmd->add_option("--out", bench.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*train_cmd) run_train(train);
    else if (*augment_cmd) run_augment(augment);
    else if (*eval_cmd) run_eval(eval);
    else if (*trials_cmd) run_trials_cmd(trials);
    else if (*fill_cmd) run_pools_fill(fill);
    else if (*make_cmd) run_bench_make(bench);
    return 0;
  } catch (const RemoteError& e) {
    spdlog::error("remote service: {}", e.what());
    return kExitRemote;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
}
