#include <algorithm>
#include <cmath>
#include <numeric>

#include "privaug/augment.hpp"

namespace privaug {

std::string build_simulation_prompt(const SeedDataset& seed, const Tokens& c, Rng& rng) {
  if (seed.pairs.empty()) throw DataError("simulation prompt: empty seed dataset");
  std::vector<std::size_t> order(seed.pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  std::string prompt;
  for (auto i : order) prompt += "C: " + join(seed.pairs[i].canonical) + "\nN: " + join(seed.pairs[i].natural) + "\n\n";
  return prompt + "C: " + join(c) + "\nN: ";
}

std::vector<Tokens> simulate_naturals(CompletionBackend& client, const SeedDataset& seed, const Tokens& c,
                                      std::size_t k, Rng& rng, double temperature) {
  if (k == 0) throw DataError("simulate_naturals: k must be at least 1");
  CompletionRequest req;
  req.prompt = build_simulation_prompt(seed, c, rng);
  req.temperature = temperature;
  req.n_samples = static_cast<int>(k);
  req.stop = "\n";
  std::vector<Tokens> out;
  for (const auto& text : client.complete(req)) {
    auto tokens = tokenize(truncate_at_stop(text, "\n"));
    if (!tokens.empty()) out.push_back(std::move(tokens));
  }
  return out;
}

std::size_t edit_distance(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rerank_score(const NoisyChannelParser& p, const Tokens& c, const Tokens& n, const RerankWeights& w) {
  if (!(w.cap_ratio > 0.0)) throw DataError("rerank: cap_ratio must be positive");
  const double len = static_cast<double>(std::max<std::size_t>(1, c.size()));
  const double cap = w.cap_ratio * len;
  const double ed = std::min(static_cast<double>(edit_distance(n, c)), cap);
  const double parse_term = w.parser_term == RerankWeights::ParserTerm::kPosterior
                                ? parse_posterior(p, n, c)
                                : score_parse(p, n, c) / len;
  return w.alpha * parse_term + w.beta * ed / cap;
}

SilverPair rerank_filter(const NoisyChannelParser& p, const Tokens& c, const std::vector<Tokens>& naturals,
                         const RerankWeights& w) {
  if (naturals.empty()) throw DataError("rerank_filter: no candidates");
  std::size_t best = 0;
  double best_score = rerank_score(p, c, naturals[0], w);
  for (std::size_t i = 1; i < naturals.size(); ++i) {
    const double s = rerank_score(p, c, naturals[i], w);
    if (s > best_score) best = i, best_score = s;
  }
  return {c, naturals[best], parse_canonical(p.grammar(), c), best_score, FilterKind::kRerank, Provenance::kFromU};
}

CycleResult cycle_filter(const NoisyChannelParser& p, const std::vector<std::pair<Tokens, Tokens>>& candidates) {
  CycleResult out;
  out.candidates = candidates.size();
  for (const auto& [c, n] : candidates) {
    try {
      auto r = parse_top1(p, n);
      if (r.canonical == c)
        out.accepted.push_back({c, n, std::move(r.derivation), r.logprob, FilterKind::kCycle, Provenance::kFromU});
    } catch (const DecodeError&) {
    }
  }
  if (out.candidates)
    out.success_rate = static_cast<double>(out.accepted.size()) / static_cast<double>(out.candidates);
  return out;
}

std::string to_string(FilterKind k) { return k == FilterKind::kRerank ? "rerank" : "cycle"; }

FilterKind filter_kind_from_string(std::string_view s) {
  if (s == "rerank") return FilterKind::kRerank;
  if (s == "cycle") return FilterKind::kCycle;
  throw DataError("unknown filter kind '" + std::string(s) + "'");
}

}  // namespace privaug
