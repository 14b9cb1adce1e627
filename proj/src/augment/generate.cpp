#include <algorithm>
#include <map>

#include "privaug/augment.hpp"
#include "privaug/pii.hpp"

namespace privaug {

SeedDataset SeedDataset::from_pairs(const Grammar& g, const std::vector<ParallelPair>& pairs) {
  SeedDataset out;
  for (const auto& p : pairs) out.pairs.push_back({p.natural, p.canonical, parse_canonical(g, p.canonical)});
  return out;
}

std::vector<ParallelPair> SeedDataset::parallel() const {
  std::vector<ParallelPair> out;
  for (const auto& p : pairs) out.push_back({p.natural, p.canonical});
  return out;
}

std::vector<Tokens> SeedDataset::canonicals() const {
  std::vector<Tokens> out;
  for (const auto& p : pairs) out.push_back(p.canonical);
  return out;
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::kFromU: return "from_u";
    case Provenance::kFromD: return "from_d";
    case Provenance::kGrammarSample: return "grammar_sample";
  }
  return "?";
}

Provenance provenance_from_string(std::string_view s) {
  for (auto p : {Provenance::kFromU, Provenance::kFromD, Provenance::kGrammarSample})
    if (to_string(p) == s) return p;
  throw DataError("unknown provenance '" + std::string(s) + "'");
}

std::vector<Tokens> CanonicalSet::rendered() const {
  std::vector<Tokens> out;
  for (const auto& d : items) out.push_back(render_canonical(d));
  return out;
}

namespace {

// Keeps the first derivation per rendering, ordered by rendering.
std::vector<Derivation> dedupe(std::vector<Derivation> items) {
  std::map<Tokens, Derivation> unique;
  for (auto& d : items) unique.emplace(render_canonical(d), std::move(d));
  std::vector<Derivation> out;
  for (auto& [_, d] : unique) out.push_back(std::move(d));
  return out;
}

}  // namespace

CanonicalSet gen_from_u(const NoisyChannelParser& p, const UnlabeledSet& u, const ReplacementPools& pools, Rng& rng) {
  CanonicalSet out;
  out.provenance = Provenance::kFromU;
  std::vector<Derivation> parsed;
  std::set<Tokens> originals;
  for (const auto& natural : u.utterances) {
    try {
      auto r = parse_top1(p, natural);
      for (const auto& span : detect_pii(r.derivation)) originals.insert(span.value);
      parsed.push_back(std::move(r.derivation));
    } catch (const DecodeError&) {
      ++out.skipped;
    } catch (const NoParseError&) {
      ++out.skipped;
    }
  }
  std::vector<Derivation> replaced;
  for (const auto& d : parsed) {
    try {
      auto r = replace_pii(d, pools, rng, originals);
      if (!assert_no_leak(originals, {render_canonical(r)}).empty()) {
        ++out.skipped;
        continue;
      }
      replaced.push_back(std::move(r));
    } catch (const PoolError& e) {
      if (e.kind() != PoolError::Kind::kExhausted) throw;
      ++out.skipped;
    }
  }
  out.items = dedupe(std::move(replaced));
  return out;
}

CanonicalSet gen_from_d(const TokenLM& lm, const Grammar& g, const SeedDataset& seed, const ReplacementPools& pools,
                        std::size_t n, Rng& rng, const GenFromDParams& params) {
  if (n == 0) throw DataError("gen_from_d: n must be at least 1");
  if (seed.pairs.empty()) throw DataError("gen_from_d: empty seed dataset");
  if (params.decode.mode != DecodeParams::Mode::kSample) throw DataError("gen_from_d: decode mode must be sampling");
  CanonicalSet out;
  out.provenance = Provenance::kFromD;
  const auto canonicals = seed.canonicals();
  const std::size_t examples = std::clamp<std::size_t>(params.plan_examples, 1, canonicals.size());
  std::vector<Derivation> items;
  for (std::size_t i = 0; i < n; ++i) {
    const auto context = prompt_tokens(build_plan_prompt(canonicals, rng, examples));
    try {
      auto s = constrained_sample(lm, g, pools, rng, params.decode, context);
      items.push_back(parse_canonical(g, s.tokens));
    } catch (const DecodeError&) {
      ++out.skipped;
    }
  }
  out.items = dedupe(std::move(items));
  return out;
}

CanonicalSet grammar_sample_set(const Grammar& g, const ReplacementPools& pools, std::size_t n, Rng& rng,
                                int max_depth) {
  if (n == 0) throw DataError("grammar_sample_set: n must be at least 1");
  CanonicalSet out;
  out.provenance = Provenance::kGrammarSample;
  std::vector<Derivation> items;
  for (std::size_t i = 0; i < n; ++i) items.push_back(sample_derivation(g, rng, max_depth, pools));
  out.items = dedupe(std::move(items));
  return out;
}

}  // namespace privaug
