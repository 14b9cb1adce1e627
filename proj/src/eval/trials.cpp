#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "privaug/eval.hpp"

namespace privaug {

namespace {

template <class T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

MethodConfig MethodConfig::from_json(std::string_view text) {
  MethodConfig m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.name = j.at("name").get<std::string>();
    maybe(j, "baseline", m.baseline);
    maybe(j, "iterations", m.iterations);
    auto& p = m.pipeline;
    if (j.contains("generator")) {
      const auto g = j.at("generator").get<std::string>();
      if (g == "from_u") p.generator = PipelineConfig::Generator::kFromU;
      else if (g == "from_d") p.generator = PipelineConfig::Generator::kFromD;
      else if (g == "grammar_sample") p.generator = PipelineConfig::Generator::kGrammarSample;
      else throw DataError("unknown generator '" + g + "'");
    }
    if (j.contains("filter")) {
      const auto f = j.at("filter").get<std::string>();
      if (f == "rerank") p.filter = PipelineConfig::Filter::kRerank;
      else if (f == "cycle") p.filter = PipelineConfig::Filter::kCycle;
      else throw DataError("unknown filter '" + f + "'");
    }
    maybe(j, "generate_count", p.generate_count);
    maybe(j, "grammar_sample_depth", p.grammar_sample_depth);
    maybe(j, "plan_examples", p.from_d.plan_examples);
    if (j.contains("plan_decode")) {
      const auto& r = j.at("plan_decode");
      maybe(r, "max_len", p.from_d.decode.max_len);
      maybe(r, "beam_width", p.from_d.decode.beam_width);
      maybe(r, "temperature", p.from_d.decode.temperature);
      if (r.contains("mode")) {
        const auto mode = r.at("mode").get<std::string>();
        if (mode == "sample") p.from_d.decode.mode = DecodeParams::Mode::kSample;
        else if (mode == "beam") p.from_d.decode.mode = DecodeParams::Mode::kBeam;
        else throw DataError("unknown plan_decode mode '" + mode + "'");
      }
    }
    maybe(j, "plan_lm_order", p.plan_lm_order);
    maybe(j, "plan_lm_alpha", p.plan_lm_alpha);
    maybe(j, "k", p.k);
    maybe(j, "simulation_temperature", p.simulation_temperature);
    maybe(j, "workers", p.workers);
    if (j.contains("rerank")) {
      const auto& r = j.at("rerank");
      maybe(r, "alpha", p.rerank.alpha);
      maybe(r, "beta", p.rerank.beta);
      maybe(r, "cap_ratio", p.rerank.cap_ratio);
      if (r.contains("parser_term")) {
        const auto t = r.at("parser_term").get<std::string>();
        if (t == "posterior") p.rerank.parser_term = RerankWeights::ParserTerm::kPosterior;
        else if (t == "joint") p.rerank.parser_term = RerankWeights::ParserTerm::kJoint;
        else throw DataError("unknown parser_term '" + t + "'");
      }
    }
    if (j.contains("parser")) {
      const auto& r = j.at("parser");
      maybe(r, "prior_order", p.parser.prior_order);
      maybe(r, "prior_alpha", p.parser.prior_alpha);
      maybe(r, "em_iterations", p.parser.em_iterations);
      maybe(r, "beam_width", p.parser.beam_width);
      maybe(r, "max_symbols", p.parser.max_symbols);
      maybe(r, "max_slot_span", p.parser.max_slot_span);
    }
    if (j.contains("simulator")) {
      const auto& r = j.at("simulator");
      maybe(r, "alpha", m.simulator.alpha);
      maybe(r, "resample_rate", m.simulator.resample_rate);
      maybe(r, "recall_rate", m.simulator.recall_rate);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed method config: ") + e.what());
  }
  if (m.iterations < 1) throw DataError("method config: iterations must be at least 1");
  return m;
}

MethodConfig MethodConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

double run_trial(const SyntheticBenchmark& bench, const MethodConfig& method, std::uint64_t seed) {
  Rng split_rng(seed);
  const auto splits = sample_splits(bench, split_rng);
  auto seed_set = SeedDataset::from_pairs(bench.grammar, splits.seed);
  auto state = initial_state(bench.grammar, bench.replacement_pools, std::move(seed_set), splits.unlabeled(),
                             method.pipeline.parser);
  if (!method.baseline) {
    auto sim_cfg = method.simulator;
    sim_cfg.seed = derive_seed(seed, 1);
    SimulatorBackend sim(splits.background, sim_cfg);
    auto cfg = method.pipeline;
    cfg.rng_seed = derive_seed(seed, 2);
    for (int i = 0; i < method.iterations; ++i) state = run_iteration(state, cfg, sim);
  }
  return top1_match(state.parser, splits.test);
}

TrialReport run_trials(const SyntheticBenchmark& bench, const MethodConfig& method, std::size_t n_trials,
                       std::uint64_t base_seed) {
  if (n_trials < 2) throw DataError("run_trials: at least 2 trials required");
  std::vector<double> top1;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n_trials; ++i) {
    seeds.push_back(base_seed + i);
    top1.push_back(run_trial(bench, method, seeds.back()));
    spdlog::info("{} trial {} (seed {}): top-1 {:.1f}", method.name, i, seeds.back(), top1.back());
  }
  return TrialReport::from_values(method.name, std::move(top1), std::move(seeds));
}

}  // namespace privaug
