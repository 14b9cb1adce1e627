#include "privaug/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "privaug/recognizer.hpp"

namespace privaug {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Step {
  Tokens candidates;           // sorted; the end marker sorts first
  std::vector<double> logprob;  // masked and renormalized
};

// Candidate next tokens and their renormalized log-probabilities.
Step masked_step(const TokenLM& lm, const PrefixAutomaton& automaton, const Tokens& lm_prefix, bool must_end) {
  Step s;
  if (automaton.can_end()) s.candidates.emplace_back(kEos);
  if (!must_end)
    for (const auto& t : automaton.allowed()) s.candidates.push_back(t);
  if (s.candidates.empty()) return s;
  s.logprob = lm.score_candidates(lm_prefix, s.candidates);
  const double peak = *std::max_element(s.logprob.begin(), s.logprob.end());
  if (peak == kNegInf) {
    std::fill(s.logprob.begin(), s.logprob.end(), -std::log(static_cast<double>(s.candidates.size())));
    return s;
  }
  double z = 0.0;
  for (double lp : s.logprob) z += std::exp(lp - peak);
  const double log_z = peak + std::log(z);
  for (double& lp : s.logprob) lp -= log_z;
  return s;
}

std::size_t choose(const Step& s, double temperature, Rng& rng) {
  if (temperature <= 0.0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.candidates.size(); ++i) {
      if (s.logprob[i] > s.logprob[best] ||
          (s.logprob[i] == s.logprob[best] && s.candidates[i] < s.candidates[best]))
        best = i;
    }
    return best;
  }
  const double peak = *std::max_element(s.logprob.begin(), s.logprob.end());
  std::vector<double> w(s.logprob.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += w[i] = std::exp((s.logprob[i] - peak) / temperature);
  double r = uniform_unit(rng) * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    if (r < w[i]) return i;
    r -= w[i];
  }
  // Rounding left r just above the last positive weight.
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i] > 0.0) return i;
  return 0;
}

void check_params(const DecodeParams& p) {
  if (p.max_len < 1) throw DataError("decode: max_len must be >= 1");
  if (p.beam_width < 1) throw DataError("decode: beam_width must be >= 1");
  if (p.temperature < 0.0) throw DataError("decode: temperature must be >= 0");
}

}  // namespace

ScoredSequence constrained_sample(const TokenLM& lm, const Grammar& g, const ReplacementPools& pools, Rng& rng,
                                  const DecodeParams& p, std::span<const Token> context) {
  check_params(p);
  if (p.mode != DecodeParams::Mode::kSample) throw DataError("constrained_sample requires sample mode");
  PrefixAutomaton automaton(g, std::make_shared<const SlotLexicon>(g, pools));
  Tokens lm_prefix(context.begin(), context.end());
  ScoredSequence out;
  for (;;) {
    const bool must_end = out.tokens.size() >= static_cast<std::size_t>(p.max_len);
    const auto step = masked_step(lm, automaton, lm_prefix, must_end);
    if (step.candidates.empty()) {
      if (must_end)
        throw DecodeError(DecodeError::Kind::kLengthExceeded,
                          "no complete sentence within " + std::to_string(p.max_len) + " tokens");
      throw DecodeError(DecodeError::Kind::kDeadEnd, "grammar allows no continuation of: " + join(out.tokens));
    }
    const auto i = choose(step, p.temperature, rng);
    out.logprob += step.logprob[i];
    if (step.candidates[i] == kEos) return out;
    automaton = automaton.advance(step.candidates[i]);
    out.tokens.push_back(step.candidates[i]);
    lm_prefix.push_back(step.candidates[i]);
  }
}

std::vector<ScoredSequence> constrained_beam(const TokenLM& lm, const Grammar& g, const ReplacementPools& pools,
                                             const DecodeParams& p, std::span<const Token> context) {
  check_params(p);
  if (p.mode != DecodeParams::Mode::kBeam) throw DataError("constrained_beam requires beam mode");
  struct Hyp {
    PrefixAutomaton automaton;
    ScoredSequence seq;
  };
  auto order = [](const ScoredSequence& a, const ScoredSequence& b) {
    if (a.logprob != b.logprob) return a.logprob > b.logprob;
    return a.tokens < b.tokens;
  };
  const auto width = static_cast<std::size_t>(p.beam_width);
  const Tokens ctx(context.begin(), context.end());
  std::vector<Hyp> live{{PrefixAutomaton(g, std::make_shared<const SlotLexicon>(g, pools)), {}}};
  std::vector<ScoredSequence> finished;
  while (!live.empty()) {
    std::vector<Hyp> next;
    for (const auto& h : live) {
      Tokens lm_prefix = ctx;
      lm_prefix.insert(lm_prefix.end(), h.seq.tokens.begin(), h.seq.tokens.end());
      const bool must_end = h.seq.tokens.size() >= static_cast<std::size_t>(p.max_len);
      const auto step = masked_step(lm, h.automaton, lm_prefix, must_end);
      for (std::size_t i = 0; i < step.candidates.size(); ++i) {
        ScoredSequence seq{h.seq.tokens, h.seq.logprob + step.logprob[i]};
        if (step.candidates[i] == kEos) {
          finished.push_back(std::move(seq));
          continue;
        }
        seq.tokens.push_back(step.candidates[i]);
        next.push_back({h.automaton.advance(step.candidates[i]), std::move(seq)});
      }
    }
    std::sort(next.begin(), next.end(), [&](const Hyp& a, const Hyp& b) { return order(a.seq, b.seq); });
    if (next.size() > width) next.erase(next.begin() + static_cast<std::ptrdiff_t>(width), next.end());
    live = std::move(next);
  }
  if (finished.empty()) throw DecodeError(DecodeError::Kind::kEmptyResult, "every beam hypothesis died");
  std::sort(finished.begin(), finished.end(), order);
  if (finished.size() > width) finished.resize(width);
  return finished;
}

std::string build_plan_prompt(const std::vector<Tokens>& seed_canonicals, Rng& rng, std::size_t n_examples) {
  if (seed_canonicals.empty()) throw DataError("build_plan_prompt: empty seed");
  if (n_examples < 1 || n_examples > seed_canonicals.size())
    throw DataError("build_plan_prompt: n_examples must be in [1, " + std::to_string(seed_canonicals.size()) + "]");
  std::vector<std::size_t> idx(seed_canonicals.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::string out;
  // Partial Fisher-Yates: the first n_examples positions are the draw order.
  for (std::size_t i = 0; i < n_examples; ++i) {
    std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
    out += join(seed_canonicals[idx[i]]) + "\n";
  }
  return out;
}

Tokens prompt_tokens(const std::string& prompt) {
  Tokens out;
  std::istringstream in(prompt);
  std::string line;
  while (std::getline(in, line)) {
    for (auto& t : tokenize(line)) out.push_back(std::move(t));
    out.emplace_back(kBos);
  }
  return out;
}

}  // namespace privaug
