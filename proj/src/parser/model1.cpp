// Translation table and IBM Model 1 expectation maximization.

#include <algorithm>
#include <cmath>
#include <set>

#include "privaug/parser.hpp"

namespace privaug {

int TranslationTable::intern_canonical(const Token& t) {
  auto [it, inserted] = canonical_ids_.emplace(t, static_cast<int>(canonical_tokens_.size()));
  if (inserted) canonical_tokens_.push_back(t);
  return it->second;
}

int TranslationTable::intern_natural(const Token& t) {
  auto [it, inserted] = natural_ids_.emplace(t, static_cast<int>(natural_tokens_.size()));
  if (inserted) natural_tokens_.push_back(t);
  return it->second;
}

int TranslationTable::canonical_id(const Token& t) const {
  auto it = canonical_ids_.find(t);
  return it == canonical_ids_.end() ? -1 : it->second;
}

int TranslationTable::natural_id(const Token& t) const {
  auto it = natural_ids_.find(t);
  return it == natural_ids_.end() ? -1 : it->second;
}

double TranslationTable::prob_ids(int canonical, int natural) const {
  if (canonical < 0 || natural < 0) return 0.0;
  auto it = probs_.find(key(canonical, natural));
  return it == probs_.end() ? 0.0 : it->second;
}

double TranslationTable::prob(const Token& canonical, const Token& natural) const {
  return prob_ids(canonical_id(canonical), natural_id(natural));
}

std::vector<std::tuple<Token, Token, double>> TranslationTable::entries() const {
  std::vector<std::tuple<Token, Token, double>> out;
  out.reserve(probs_.size());
  for (const auto& [k, p] : probs_)
    out.emplace_back(canonical_tokens_[k >> 32], natural_tokens_[k & 0xffffffffULL], p);
  std::sort(out.begin(), out.end());
  return out;
}

double TranslationTable::row_sum(const Token& canonical) const {
  const int c = canonical_id(canonical);
  double total = 0.0;
  for (int n = 0; c >= 0 && n < static_cast<int>(natural_tokens_.size()); ++n) total += prob_ids(c, n);
  return total;
}

std::vector<Token> TranslationTable::canonical_vocabulary() const {
  auto v = canonical_tokens_;
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<Token> TranslationTable::natural_vocabulary() const {
  auto v = natural_tokens_;
  std::sort(v.begin(), v.end());
  return v;
}

TranslationTable TranslationTable::from_entries(const std::vector<std::tuple<Token, Token, double>>& entries) {
  TranslationTable t;
  for (const auto& [c, n, p] : entries) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("translation probability out of range");
    t.probs_[key(t.intern_canonical(c), t.intern_natural(n))] = p;
  }
  return t;
}

double corpus_log_likelihood(const TranslationTable& t, const std::vector<ParallelPair>& pairs) {
  const int null_id = t.canonical_id(Token(kNull));
  double total = 0.0;
  std::vector<int> cids;
  for (const auto& pair : pairs) {
    cids.clear();
    for (const auto& c : pair.canonical) cids.push_back(t.canonical_id(c));
    cids.push_back(null_id);
    for (const auto& n : pair.natural) {
      const int nid = t.natural_id(n);
      double sum = 0.0;
      for (int c : cids) sum += t.prob_ids(c, nid);
      total += std::log(std::max(1e-300, sum / static_cast<double>(cids.size())));
    }
  }
  return total;
}

TranslationTable model1_em(const std::vector<ParallelPair>& pairs, int iterations, std::vector<double>* trace) {
  if (pairs.empty()) throw DataError("model1_em: no training pairs");
  if (iterations < 1) throw DataError("model1_em: iterations must be >= 1");

  TranslationTable t;
  std::set<Token> canon_vocab{Token(kNull)}, nat_vocab;
  for (const auto& p : pairs) {
    canon_vocab.insert(p.canonical.begin(), p.canonical.end());
    nat_vocab.insert(p.natural.begin(), p.natural.end());
  }
  if (nat_vocab.empty()) throw DataError("model1_em: no natural tokens");
  for (const auto& c : canon_vocab) t.intern_canonical(c);
  for (const auto& n : nat_vocab) t.intern_natural(n);
  const int null_id = t.canonical_id(Token(kNull));
  const auto n_canon = t.canonical_tokens_.size();
  const auto n_nat = t.natural_tokens_.size();

  // Sentences as ids, null appended to every canonical side.
  std::vector<std::pair<std::vector<int>, std::vector<int>>> corpus;
  corpus.reserve(pairs.size());
  for (const auto& p : pairs) {
    std::vector<int> c, n;
    for (const auto& tok : p.canonical) c.push_back(t.canonical_id(tok));
    c.push_back(null_id);
    for (const auto& tok : p.natural) n.push_back(t.natural_id(tok));
    corpus.emplace_back(std::move(c), std::move(n));
  }

  // Uniform start: every canonical row spreads evenly over the natural vocabulary.
  for (std::size_t c = 0; c < n_canon; ++c)
    for (std::size_t n = 0; n < n_nat; ++n)
      t.probs_[TranslationTable::key(static_cast<int>(c), static_cast<int>(n))] = 1.0 / static_cast<double>(n_nat);
  if (trace) {
    trace->clear();
    trace->push_back(corpus_log_likelihood(t, pairs));
  }

  std::unordered_map<std::uint64_t, double> counts;
  std::vector<double> totals(n_canon);
  std::vector<double> weights;
  for (int iter = 0; iter < iterations; ++iter) {
    counts.clear();
    std::fill(totals.begin(), totals.end(), 0.0);
    for (const auto& [c_ids, n_ids] : corpus) {
      for (int n : n_ids) {
        weights.clear();
        double denom = 0.0;
        for (int c : c_ids) {
          weights.push_back(t.prob_ids(c, n));
          denom += weights.back();
        }
        if (denom <= 0.0) continue;
        for (std::size_t i = 0; i < c_ids.size(); ++i) {
          const double w = weights[i] / denom;
          counts[TranslationTable::key(c_ids[i], n)] += w;
          totals[c_ids[i]] += w;
        }
      }
    }
    // Rows of canonical tokens that never co-occur with a natural token keep
    // their previous distribution.
    for (auto it = t.probs_.begin(); it != t.probs_.end();) {
      if (totals[it->first >> 32] > 0.0) it = t.probs_.erase(it);
      else ++it;
    }
    for (const auto& [k, v] : counts) t.probs_[k] = v / totals[k >> 32];
    if (trace) trace->push_back(corpus_log_likelihood(t, pairs));
  }
  return t;
}

}  // namespace privaug
