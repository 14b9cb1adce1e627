#include <algorithm>

#include "privaug/pii.hpp"

namespace privaug {

namespace {

bool overlaps(const Tokens& a, const Tokens& b) {
  auto within = [](const Tokens& hay, const Tokens& needle) {
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
  };
  return within(a, b) || within(b, a);
}

std::string fill_prompt(const std::string& category, std::vector<Tokens> examples, Rng& rng) {
  std::shuffle(examples.begin(), examples.end(), rng);
  std::string prompt = "Examples of " + category + " values, one per line:\n";
  for (const auto& e : examples) prompt += "- " + join(e) + "\n";
  return prompt + "- ";
}

}  // namespace

std::vector<Tokens> fill_pool(CompletionBackend& backend, const std::string& category,
                              const std::vector<Tokens>& examples, const PoolFillParams& params, Rng& rng,
                              const std::set<Tokens>& avoid) {
  if (examples.empty()) throw PoolError(PoolError::Kind::kInvalid, "no example values for '" + category + "'");
  std::set<Tokens> seen(examples.begin(), examples.end());
  std::vector<Tokens> found;
  for (int round = 0; round < params.max_rounds && found.size() < params.count; ++round) {
    CompletionRequest req;
    req.prompt = fill_prompt(category, examples, rng);
    req.max_tokens = params.max_tokens;
    req.temperature = params.temperature;
    req.n_samples = params.samples_per_round;
    req.stop = "\n";
    for (const auto& text : backend.complete(req)) {
      const Tokens v = tokenize(truncate_at_stop(text, req.stop));
      if (v.empty() || std::find(v.begin(), v.end(), kQuote) != v.end() || seen.count(v)) continue;
      if (std::any_of(avoid.begin(), avoid.end(), [&](const Tokens& a) { return overlaps(v, a); })) continue;
      seen.insert(v);
      found.push_back(v);
      if (found.size() == params.count) break;
    }
  }
  return found;
}

}  // namespace privaug
