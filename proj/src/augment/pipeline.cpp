#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <thread>

#include <spdlog/spdlog.h>

#include "privaug/augment.hpp"

namespace privaug {

std::string to_string(PipelineConfig::Generator g) {
  switch (g) {
    case PipelineConfig::Generator::kFromU: return "from_u";
    case PipelineConfig::Generator::kFromD: return "from_d";
    case PipelineConfig::Generator::kGrammarSample: return "grammar_sample";
  }
  return "?";
}

std::string to_string(PipelineConfig::Filter f) { return f == PipelineConfig::Filter::kRerank ? "rerank" : "cycle"; }

PipelineState initial_state(Grammar grammar, ReplacementPools pools, SeedDataset seed, UnlabeledSet unlabeled,
                            const ParserConfig& parser_cfg) {
  auto parser = train_parser(seed.parallel(), grammar, pools, parser_cfg);
  return {std::move(grammar), std::move(pools), std::move(seed), std::move(unlabeled), std::move(parser), {}, 0, {}};
}

namespace {

// Stream ids for per-stage generators.
enum Stream : std::uint64_t { kGenerate = 1, kSimulate = 2 };

std::vector<std::vector<Tokens>> simulate_all(CompletionBackend& backend, const SeedDataset& seed,
                                              const std::vector<Tokens>& canonicals, const PipelineConfig& cfg,
                                              std::uint64_t stage_seed) {
  std::vector<std::vector<Tokens>> out(canonicals.size());
  std::vector<std::exception_ptr> errors(canonicals.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t i; !failed && (i = next++) < canonicals.size();) {
      try {
        Rng rng(derive_seed(stage_seed, i));
        out[i] = simulate_naturals(backend, seed, canonicals[i], cfg.k, rng, cfg.simulation_temperature);
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, cfg.workers));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < std::min(workers, canonicals.size()); ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace

PipelineState run_iteration(const PipelineState& state, const PipelineConfig& cfg, CompletionBackend& backend,
                            const TokenLM* plan_lm) {
  PipelineState next = state;
  IterationReport rep;
  rep.iteration = state.iteration + 1;
  const auto iter_seed = derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(rep.iteration));
  std::optional<std::filesystem::path> dir;
  if (cfg.state_dir) {
    dir = *cfg.state_dir / ("iter" + std::to_string(rep.iteration));
    std::filesystem::create_directories(*dir);
  }
  std::string stage = "generate";
  try {
    Rng gen_rng(derive_seed(iter_seed, kGenerate));
    CanonicalSet cs;
    switch (cfg.generator) {
      case PipelineConfig::Generator::kFromU:
        cs = gen_from_u(state.parser, state.unlabeled, state.pools, gen_rng);
        break;
      case PipelineConfig::Generator::kFromD: {
        std::optional<NGramModel> own;
        if (!plan_lm) plan_lm = &own.emplace(train_ngram(state.seed.canonicals(), cfg.plan_lm_order, cfg.plan_lm_alpha));
        cs = gen_from_d(*plan_lm, state.grammar, state.seed, state.pools, cfg.generate_count, gen_rng, cfg.from_d);
        break;
      }
      case PipelineConfig::Generator::kGrammarSample:
        cs = grammar_sample_set(state.grammar, state.pools, cfg.generate_count, gen_rng, cfg.grammar_sample_depth);
        break;
    }
    rep.canonicals = cs.items.size();
    rep.generate_skipped = cs.skipped;
    spdlog::info("iteration {} generate ({}): {} canonicals, {} skipped", rep.iteration, to_string(cfg.generator),
                 rep.canonicals, rep.generate_skipped);
    if (dir) write_canonicals_jsonl(*dir / "canonical.jsonl", cs);

    stage = "simulate";
    const auto canonicals = cs.rendered();
    const auto naturals =
        simulate_all(backend, state.seed, canonicals, cfg, derive_seed(iter_seed, kSimulate));
    for (const auto& n : naturals) rep.simulated += n.size();
    spdlog::info("iteration {} simulate: {} naturals for {} canonicals", rep.iteration, rep.simulated,
                 canonicals.size());

    stage = "filter";
    std::vector<SilverPair> fresh;
    if (cfg.filter == PipelineConfig::Filter::kRerank) {
      for (std::size_t i = 0; i < canonicals.size(); ++i) {
        if (naturals[i].empty()) continue;
        rep.candidates += naturals[i].size();
        fresh.push_back(rerank_filter(state.parser, canonicals[i], naturals[i], cfg.rerank));
      }
    } else {
      std::vector<std::pair<Tokens, Tokens>> candidates;
      for (std::size_t i = 0; i < canonicals.size(); ++i) {
        std::set<Tokens> seen;
        for (const auto& n : naturals[i])
          if (seen.insert(n).second) candidates.emplace_back(canonicals[i], n);
      }
      auto cycle = cycle_filter(state.parser, candidates);
      rep.candidates = cycle.candidates;
      rep.cycle_success_rate = cycle.success_rate;
      fresh = std::move(cycle.accepted);
    }
    for (auto& s : fresh) s.provenance = cs.provenance;
    rep.accepted = fresh.size();
    spdlog::info("iteration {} filter ({}): {} of {} candidates accepted", rep.iteration, to_string(cfg.filter),
                 rep.accepted, rep.candidates);

    stage = "retrain";
    std::map<std::pair<Tokens, Tokens>, SilverPair> merged;
    for (const auto& s : state.silver) merged.emplace(std::pair{s.canonical, s.natural}, s);
    for (auto& s : fresh) merged.emplace(std::pair{s.canonical, s.natural}, std::move(s));
    next.silver.clear();
    for (auto& [_, s] : merged) next.silver.push_back(std::move(s));
    rep.silver_total = next.silver.size();

    auto training = state.seed.parallel();
    for (const auto& s : next.silver) training.push_back({s.natural, s.canonical});
    std::sort(training.begin(), training.end());
    rep.training_pairs = training.size();
    next.parser = train_parser(training, state.grammar, state.pools, cfg.parser);
    spdlog::info("iteration {} retrain: {} silver pairs, {} training pairs", rep.iteration, rep.silver_total,
                 rep.training_pairs);

    next.iteration = rep.iteration;
    next.reports.push_back(rep);
    if (dir) {
      write_silver_jsonl(*dir / "silver.jsonl", next.silver);
      next.parser.save(*dir / "parser.bin");
      write_report_json(*dir / "report.json", rep);
    }
    return next;
  } catch (const std::exception& e) {
    rep.status = "error";
    rep.failed_stage = stage;
    rep.error = e.what();
    spdlog::error("iteration {} failed in {}: {}", rep.iteration, stage, e.what());
    if (dir) write_report_json(*dir / "report.json", rep);
    throw;
  }
}

}  // namespace privaug
