// Silver-data augmentation: canonical generation (from unlabeled utterances,
// from seed plans, or from the grammar), natural-utterance simulation,
// pair filtering and the iterated retraining pipeline.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "privaug/common.hpp"
#include "privaug/decoder.hpp"
#include "privaug/lm.hpp"
#include "privaug/parser.hpp"
#include "privaug/pools.hpp"
#include "privaug/scfg.hpp"

namespace privaug {

struct SeedPair {
  Tokens natural;
  Tokens canonical;
  Derivation derivation;
};

struct SeedDataset {
  std::vector<SeedPair> pairs;

  /// Parses every canonical; throws NoParseError.
  static SeedDataset from_pairs(const Grammar& g, const std::vector<ParallelPair>& pairs);
  std::vector<ParallelPair> parallel() const;
  std::vector<Tokens> canonicals() const;
};

struct UnlabeledSet {
  std::vector<Tokens> utterances;
};

enum class Provenance { kFromU, kFromD, kGrammarSample };
std::string to_string(Provenance p);
/// Throws DataError.
Provenance provenance_from_string(std::string_view s);

struct CanonicalSet {
  /// Sorted by rendered canonical, one item per rendering.
  std::vector<Derivation> items;
  Provenance provenance = Provenance::kFromU;
  /// Inputs that produced no item (parse, decode or pool failures).
  std::size_t skipped = 0;

  std::vector<Tokens> rendered() const;
};

enum class FilterKind { kRerank, kCycle };
std::string to_string(FilterKind k);
/// Throws DataError.
FilterKind filter_kind_from_string(std::string_view s);

struct SilverPair {
  Tokens canonical;
  Tokens natural;
  Derivation derivation;
  double filter_score = 0.0;
  FilterKind filter_kind = FilterKind::kRerank;
  Provenance provenance = Provenance::kFromU;
};

/// Parses each utterance with `p`, redraws every slot value from `pools` and
/// keeps the result. No item contains any slot value found anywhere in `u`:
/// draws exclude all of them, and an item that would still contain one (for
/// instance a value spelled like a grammar word) is dropped and counted as
/// skipped, as are parse failures and exhausted pools. The utterances
/// themselves are not retained.
CanonicalSet gen_from_u(const NoisyChannelParser& p, const UnlabeledSet& u, const ReplacementPools& pools, Rng& rng);

struct GenFromDParams {
  DecodeParams decode;
  /// Seed plans per prompt, capped at |seed|.
  std::size_t plan_examples = 20;
};

/// `n` grammar-constrained samples from `lm`, each conditioned on a freshly
/// shuffled plan prompt of seed canonicals. Slot values come from `pools`.
/// Decode failures are counted as skipped. Throws DataError if n is 0 or the
/// seed is empty.
CanonicalSet gen_from_d(const TokenLM& lm, const Grammar& g, const SeedDataset& seed, const ReplacementPools& pools,
                        std::size_t n, Rng& rng, const GenFromDParams& params = {});

/// `n` derivations sampled from the grammar with slot values from `pools`.
/// Throws DataError if n is 0; DepthExhaustedError propagates.
CanonicalSet grammar_sample_set(const Grammar& g, const ReplacementPools& pools, std::size_t n, Rng& rng,
                                int max_depth = 4);

/// The simulation prompt: seed pairs in rng order as `C: <canonical>` /
/// `N: <natural>` blocks separated by blank lines, ending with `C: <c>` and an
/// empty `N: ` line. Throws DataError on an empty seed.
std::string build_simulation_prompt(const SeedDataset& seed, const Tokens& c, Rng& rng);

/// Requests `k` completions of the simulation prompt for `c`, cut at the first
/// newline; empty completions are dropped. Throws DataError if k is 0 or the
/// seed is empty; remote errors propagate.
std::vector<Tokens> simulate_naturals(CompletionBackend& client, const SeedDataset& seed, const Tokens& c,
                                      std::size_t k, Rng& rng, double temperature = 0.9);

/// Token-level Levenshtein distance with unit costs.
std::size_t edit_distance(const Tokens& a, const Tokens& b);

struct RerankWeights {
  /// kPosterior: log P(c | n) from parse_posterior. kJoint: the joint
  /// score_parse(p, n, c) divided by max(1, |c|).
  enum class ParserTerm { kPosterior, kJoint };

  double alpha = 1.0;
  double beta = 0.5;
  double cap_ratio = 1.0;
  ParserTerm parser_term = ParserTerm::kPosterior;
};

/// Score of one candidate: alpha * parser_term + beta * min(ed(n, c), cap) / cap
/// with cap = cap_ratio * max(1, |c|).
double rerank_score(const NoisyChannelParser& p, const Tokens& c, const Tokens& n, const RerankWeights& w);

/// The highest-scoring candidate (earliest on ties) as a rerank SilverPair.
/// Throws DataError on no candidates or cap_ratio <= 0; NoParseError if c is
/// not a canonical of the parser's grammar.
SilverPair rerank_filter(const NoisyChannelParser& p, const Tokens& c, const std::vector<Tokens>& naturals,
                         const RerankWeights& w = {});

struct CycleResult {
  std::vector<SilverPair> accepted;
  std::size_t candidates = 0;
  /// accepted / candidates, 0 when there are no candidates.
  double success_rate = 0.0;
};

/// Keeps the (c, n) pairs for which parse_top1(p, n) is exactly c; the filter
/// score is that parse's log-probability.
CycleResult cycle_filter(const NoisyChannelParser& p, const std::vector<std::pair<Tokens, Tokens>>& candidates);

struct PipelineConfig {
  enum class Generator { kFromU, kFromD, kGrammarSample };
  enum class Filter { kRerank, kCycle };

  Generator generator = Generator::kFromU;
  Filter filter = Filter::kRerank;
  /// Canonicals requested from GenFromD and GrammarSample.
  std::size_t generate_count = 300;
  int grammar_sample_depth = 4;
  GenFromDParams from_d;
  /// Order and smoothing of the n-gram plan LM trained on seed canonicals
  /// when run_iteration is given no plan LM.
  int plan_lm_order = 3;
  double plan_lm_alpha = 0.1;
  /// Simulated naturals per canonical.
  std::size_t k = 20;
  double simulation_temperature = 0.9;
  RerankWeights rerank;
  ParserConfig parser;
  std::uint64_t rng_seed = 0;
  /// Concurrent simulation requests.
  int workers = 1;
  /// When set, every iteration writes `<state_dir>/iter<k>/`.
  std::optional<std::filesystem::path> state_dir;
};

std::string to_string(PipelineConfig::Generator g);
std::string to_string(PipelineConfig::Filter f);

/// Per-stage counts of one iteration.
struct IterationReport {
  int iteration = 0;
  std::string status = "ok";
  std::string failed_stage;
  std::string error;
  std::size_t canonicals = 0;
  std::size_t generate_skipped = 0;
  std::size_t simulated = 0;
  std::size_t candidates = 0;
  std::size_t accepted = 0;
  std::size_t silver_total = 0;
  std::size_t training_pairs = 0;
  double cycle_success_rate = 0.0;
};

struct PipelineState {
  Grammar grammar;
  ReplacementPools pools;
  SeedDataset seed;
  UnlabeledSet unlabeled;
  NoisyChannelParser parser;
  /// Accumulated across iterations, unique by (canonical, natural), sorted.
  std::vector<SilverPair> silver;
  int iteration = 0;
  std::vector<IterationReport> reports;
};

/// Trains the initial parser on the seed.
PipelineState initial_state(Grammar grammar, ReplacementPools pools, SeedDataset seed, UnlabeledSet unlabeled,
                            const ParserConfig& parser_cfg = {});

/// Generate, simulate, filter, then retrain on the seed plus all silver
/// pairs. The result depends only on the inputs and cfg.rng_seed, not on
/// thread scheduling. On a stage failure the partial report is written to the
/// state directory (when configured) and the error is rethrown.
PipelineState run_iteration(const PipelineState& state, const PipelineConfig& cfg, CompletionBackend& backend,
                            const TokenLM* plan_lm = nullptr);

// Newline-delimited JSON datasets.
std::vector<ParallelPair> read_pairs_jsonl(const std::filesystem::path& path);
void write_pairs_jsonl(const std::filesystem::path& path, const std::vector<ParallelPair>& pairs);
/// Records with a `natural` field.
UnlabeledSet read_unlabeled_jsonl(const std::filesystem::path& path);
void write_unlabeled_jsonl(const std::filesystem::path& path, const UnlabeledSet& u);
void write_canonicals_jsonl(const std::filesystem::path& path, const CanonicalSet& set);
void write_silver_jsonl(const std::filesystem::path& path, const std::vector<SilverPair>& silver);
/// Throws DataError on malformed records, NoParseError on invalid canonicals.
std::vector<SilverPair> read_silver_jsonl(const std::filesystem::path& path, const Grammar& g);
void write_report_json(const std::filesystem::path& path, const IterationReport& r);

}  // namespace privaug
