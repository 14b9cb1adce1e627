// Noisy-channel semantic parser: an n-gram prior over canonical utterances
// times an IBM Model 1 channel P(natural | canonical), decoded by beam search
// under the grammar.
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "privaug/common.hpp"
#include "privaug/lm.hpp"
#include "privaug/pools.hpp"
#include "privaug/scfg.hpp"

namespace privaug {

inline constexpr std::string_view kNull = "<null>";

struct ParallelPair {
  Tokens natural;
  Tokens canonical;

  friend auto operator<=>(const ParallelPair&, const ParallelPair&) = default;
};

/// t(natural | canonical) with a null canonical token. Rows are normalized
/// and sparse: absent entries have probability 0.
class TranslationTable {
 public:
  double prob(const Token& canonical, const Token& natural) const;
  bool has_natural(const Token& natural) const { return natural_ids_.count(natural) > 0; }
  bool has_canonical(const Token& canonical) const { return canonical_ids_.count(canonical) > 0; }
  /// Sorted (canonical, natural, probability) triples.
  std::vector<std::tuple<Token, Token, double>> entries() const;
  /// Sum of the row for `canonical`.
  double row_sum(const Token& canonical) const;
  std::vector<Token> canonical_vocabulary() const;
  std::vector<Token> natural_vocabulary() const;

  static TranslationTable from_entries(const std::vector<std::tuple<Token, Token, double>>& entries);

  // Dense-id access for inner loops; ids are -1 when absent.
  int canonical_id(const Token& t) const;
  int natural_id(const Token& t) const;
  double prob_ids(int canonical, int natural) const;

 private:
  friend TranslationTable model1_em(const std::vector<ParallelPair>&, int, std::vector<double>*);
  static std::uint64_t key(int c, int n) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c)) << 32) | static_cast<std::uint32_t>(n);
  }
  int intern_canonical(const Token& t);
  int intern_natural(const Token& t);

  std::vector<Token> canonical_tokens_, natural_tokens_;
  std::unordered_map<Token, int> canonical_ids_, natural_ids_;
  std::unordered_map<std::uint64_t, double> probs_;
};

/// Model 1 log-likelihood: sum over pairs and natural tokens of
/// log(mean over canonical tokens plus null of t(n | c)), floored at 1e-300.
double corpus_log_likelihood(const TranslationTable& t, const std::vector<ParallelPair>& pairs);

/// Uniform initialization followed by `iterations` EM updates. When `trace`
/// is given it receives the likelihood of the initial table and after every
/// iteration. Throws DataError on empty input.
TranslationTable model1_em(const std::vector<ParallelPair>& pairs, int iterations,
                           std::vector<double>* trace = nullptr);

struct ParserConfig {
  int prior_order = 3;
  double prior_alpha = 0.1;
  int em_iterations = 10;
  int beam_width = 16;
  /// Upper bound on grammar symbols (terminals plus whole slots) per parse.
  int max_symbols = 64;
  /// Longest natural span of unknown tokens offered as a slot value.
  int max_slot_span = 4;
};

/// Slot values are replaced by a single `<category>` token on the canonical
/// side and by one `<category>` per token at every occurrence on the natural
/// side, so the prior and channel generalize across values.
ParallelPair delexicalize(const Derivation& d, const Tokens& natural);

class NoisyChannelParser {
 public:
  NoisyChannelParser(Grammar grammar, ReplacementPools pools, NGramModel prior, TranslationTable channel,
                     ParserConfig cfg);

  const Grammar& grammar() const { return grammar_; }
  const ReplacementPools& pools() const { return pools_; }
  const NGramModel& prior() const { return prior_; }
  const TranslationTable& channel() const { return channel_; }
  const ParserConfig& config() const { return cfg_; }

  /// Slot value candidates for `natural`: every pool value of the category,
  /// spans between paired quote tokens, and spans of up to max_slot_span
  /// tokens that are neither channel vocabulary nor grammar terminals.
  std::vector<Tokens> slot_candidates(const std::string& category, const Tokens& natural) const;

  /// Self-describing binary file (CBOR) with the grammar fingerprint, prior
  /// counts, channel table and configuration.
  void save(const std::filesystem::path& path) const;
  std::string serialize() const;
  /// Throws DataError if the file is malformed or built for another grammar.
  static NoisyChannelParser load(const std::filesystem::path& path, Grammar grammar, ReplacementPools pools);
  static NoisyChannelParser deserialize(const std::string& bytes, Grammar grammar, ReplacementPools pools);

 private:
  Grammar grammar_;
  ReplacementPools pools_;
  NGramModel prior_;
  TranslationTable channel_;
  ParserConfig cfg_;
};

/// Canonicals are re-parsed to locate slot values, delexicalized, and used to
/// train the prior (train_ngram) and channel (model1_em). Throws DataError on
/// an empty dataset and NoParseError on an invalid canonical.
NoisyChannelParser train_parser(const std::vector<ParallelPair>& data, const Grammar& grammar,
                                const ReplacementPools& pools, const ParserConfig& cfg = {});

/// log prior(canonical) + sum over natural tokens of
/// log max(1e-12, mean over canonical tokens plus null of t(n | c)), both
/// after delexicalization. Throws NoParseError.
double score_parse(const NoisyChannelParser& p, const Tokens& natural, const Tokens& canonical);

struct ParseResult {
  Tokens canonical;
  Derivation derivation;
  double logprob = 0.0;
};

/// Beam search over grammar symbols; completed sequences are ranked by
/// score_parse, ties broken by the lexicographically smaller canonical.
/// Throws DecodeError(kEmptyResult) if no sequence completes.
ParseResult parse_top1(const NoisyChannelParser& p, const Tokens& natural);

/// The best `k` distinct canonicals of the same search, best first.
std::vector<ParseResult> parse_kbest(const NoisyChannelParser& p, const Tokens& natural, std::size_t k);

/// log P(canonical | natural), normalizing exp(score_parse) over the
/// canonical and the beam_width-best parses of `natural`. Exact when the
/// search covers the whole language. Throws NoParseError.
double parse_posterior(const NoisyChannelParser& p, const Tokens& natural, const Tokens& canonical);

}  // namespace privaug
