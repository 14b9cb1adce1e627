// Grammar-constrained generation over any token language model, and the
// plan prompts used to condition it.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "privaug/common.hpp"
#include "privaug/lm.hpp"
#include "privaug/pools.hpp"
#include "privaug/scfg.hpp"

namespace privaug {

struct DecodeParams {
  enum class Mode { kSample, kBeam };
  int max_len = 32;
  int beam_width = 4;
  double temperature = 1.0;
  Mode mode = Mode::kSample;
};

struct ScoredSequence {
  Tokens tokens;
  double logprob = 0.0;
};

/// Samples one sentence of the grammar (slots expanded by pool values). Each
/// step masks the LM's next-token log-probabilities to the tokens the grammar
/// allows (plus the end marker when the prefix is complete), renormalizes,
/// applies the temperature and samples; temperature 0 is greedy with the
/// lexicographically smallest token winning ties. A sentence of max_len tokens
/// may only end. If the LM gives every allowed token zero mass the step is
/// uniform over them. `logprob` sums the masked, renormalized log-probs before
/// temperature. `context` is prepended to the LM prefix (see prompt_tokens).
/// Throws DecodeError (kDeadEnd, kLengthExceeded).
ScoredSequence constrained_sample(const TokenLM& lm, const Grammar& g, const ReplacementPools& pools, Rng& rng,
                                  const DecodeParams& p, std::span<const Token> context = {});

/// Beam search over the same masked distribution. Returns up to beam_width
/// completed sentences by log-probability descending, ties broken by the
/// lexicographically smaller token sequence. Hypotheses that reach max_len
/// without completing are dropped. Throws DecodeError(kEmptyResult).
std::vector<ScoredSequence> constrained_beam(const TokenLM& lm, const Grammar& g, const ReplacementPools& pools,
                                             const DecodeParams& p, std::span<const Token> context = {});

/// `n_examples` canonical utterances drawn without replacement in rng order,
/// one per line, with a trailing newline. Throws DataError on an empty seed or
/// n_examples outside [1, |seed|].
std::string build_plan_prompt(const std::vector<Tokens>& seed_canonicals, Rng& rng, std::size_t n_examples);

/// Tokens of a prompt for the LM prefix: each line is tokenized and followed
/// by the begin marker of the next sentence.
Tokens prompt_tokens(const std::string& prompt);

}  // namespace privaug
