#include "privaug/pii.hpp"

#include <algorithm>

namespace privaug {

namespace {

void collect(const Derivation& d, std::vector<std::size_t>& path, std::vector<PIISpan>& out) {
  for (std::size_t i = 0; i < d.children.size(); ++i) {
    path.push_back(i);
    const auto& child = d.children[i];
    if (child.is_slot()) out.push_back({path, child.slot().category, child.slot().value});
    else collect(child.derivation(), path, out);
    path.pop_back();
  }
}

bool contains(const Tokens& hay, const Tokens& needle) {
  return !needle.empty() && std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

Tokens draw_value(const ReplacementPools& pools, const SlotFill& original, Rng& rng,
                  const std::set<Tokens>& exclude) {
  const auto& pool = pools.values(original.category);
  const auto* groups = pools.balance_groups(original.category);
  auto admissible = [&](const Tokens& v) {
    if (contains(v, original.value)) return false;
    return std::none_of(exclude.begin(), exclude.end(), [&](const Tokens& e) { return contains(v, e); });
  };
  for (std::size_t attempt = 0; attempt < pool.size(); ++attempt) {
    std::size_t idx;
    if (groups) {
      const auto& members = groups->members[uniform_index(rng, groups->members.size())];
      idx = members[uniform_index(rng, members.size())];
    } else {
      idx = uniform_index(rng, pool.size());
    }
    if (admissible(pool[idx])) return pool[idx];
  }
  std::vector<const Tokens*> remaining;
  for (const auto& v : pool)
    if (admissible(v)) remaining.push_back(&v);
  if (remaining.empty())
    throw PoolError(PoolError::Kind::kExhausted,
                    "pool '" + original.category + "' has no value other than " + join(original.value));
  return *remaining[uniform_index(rng, remaining.size())];
}

}  // namespace

std::vector<PIISpan> detect_pii(const Derivation& d) {
  std::vector<PIISpan> out;
  std::vector<std::size_t> path;
  collect(d, path, out);
  return out;
}

Derivation replace_pii(const Derivation& d, const ReplacementPools& pools, Rng& rng,
                       const std::set<Tokens>& exclude) {
  Derivation out{d.production, {}};
  out.children.reserve(d.children.size());
  for (const auto& child : d.children) {
    if (child.is_slot()) {
      const auto& fill = child.slot();
      out.children.push_back({SlotFill{fill.category, draw_value(pools, fill, rng, exclude)}});
    } else {
      out.children.push_back({replace_pii(child.derivation(), pools, rng, exclude)});
    }
  }
  return out;
}

std::vector<Leak> assert_no_leak(const std::set<Tokens>& original_values, const std::vector<Tokens>& corpus) {
  std::vector<Leak> report;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto& sentence = corpus[s];
    for (std::size_t pos = 0; pos < sentence.size(); ++pos) {
      for (const auto& v : original_values) {
        if (v.empty() || pos + v.size() > sentence.size()) continue;
        if (std::equal(v.begin(), v.end(), sentence.begin() + pos)) report.push_back({s, pos, v});
      }
    }
  }
  return report;
}

}  // namespace privaug
