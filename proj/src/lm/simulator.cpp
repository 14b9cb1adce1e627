// Paraphrase simulator: exemplar transfer plus bigram Gibbs resampling.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "privaug/lm.hpp"

namespace privaug {

struct SimulatorBackend::Bigrams {
  std::vector<Token> tokens;
  std::unordered_map<Token, int> ids;
  std::unordered_map<std::uint64_t, std::size_t> counts;
  std::vector<std::size_t> totals;
  std::vector<std::vector<int>> successors;
  std::vector<std::vector<int>> predecessors;
  int bos = -1, eos = -1;
  double alpha = 0.1;
  std::vector<Tokens> sentences;
  /// Token -> ids of the background sentences containing it, ascending.
  std::unordered_map<Token, std::vector<std::size_t>> containing;

  static std::uint64_t key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  }
  int id(const Token& t) const {
    auto it = ids.find(t);
    return it == ids.end() ? -1 : it->second;
  }
  int intern(const Token& t) {
    auto [it, inserted] = ids.emplace(t, static_cast<int>(tokens.size()));
    if (inserted) tokens.push_back(t);
    return it->second;
  }
  /// Word paths of length 0 to 2 from `prev` to `next` whose every bigram was
  /// observed, with their chain log-probabilities. Falls back to single
  /// successors of `prev` when no path reaches `next`.
  std::vector<std::pair<std::vector<int>, double>> paths(int prev, int next, bool allow_empty) const {
    std::vector<std::pair<std::vector<int>, double>> out;
    auto seen = [&](int a, int c) { return counts.count(key(a, c)) > 0; };
    if (allow_empty && seen(prev, next)) out.push_back({{}, logp(prev, next)});
    for (int w1 : successors[prev]) {
      if (w1 == eos) continue;
      if (seen(w1, next)) out.push_back({{w1}, logp(prev, w1) + logp(w1, next)});
      for (int w2 : successors[w1])
        if (w2 != eos && seen(w2, next)) out.push_back({{w1, w2}, logp(prev, w1) + logp(w1, w2) + logp(w2, next)});
    }
    if (out.empty())
      for (int w1 : successors[prev])
        if (w1 != eos) out.push_back({{w1}, logp(prev, w1)});
    return out;
  }
  double logp(int prev, int next) const {
    auto it = counts.find(key(prev, next));
    const double c = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((c + alpha) /
                    (static_cast<double>(totals[prev]) + alpha * static_cast<double>(tokens.size())));
  }
};

SimulatorBackend::SimulatorBackend(const std::vector<Tokens>& background, SimulatorConfig cfg) : cfg_(cfg) {
  if (background.empty()) throw DataError("simulator: empty background corpus");
  if (!(cfg.alpha > 0.0) || !(cfg.resample_rate >= 0.0 && cfg.resample_rate <= 1.0) ||
      !(cfg.recall_rate >= 0.0 && cfg.recall_rate <= 1.0))
    throw DataError("simulator: alpha must be positive, resample_rate and recall_rate in [0, 1]");
  auto b = std::make_shared<Bigrams>();
  b->alpha = cfg.alpha;
  std::set<Token> vocab{Token(kBos), Token(kEos)};
  for (const auto& s : background) vocab.insert(s.begin(), s.end());
  for (const auto& t : vocab) b->intern(t);
  b->bos = b->id(Token(kBos));
  b->eos = b->id(Token(kEos));
  b->totals.assign(b->tokens.size(), 0);
  b->sentences = background;
  for (std::size_t i = 0; i < background.size(); ++i)
    for (const auto& t : std::set<Token>(background[i].begin(), background[i].end())) b->containing[t].push_back(i);
  for (const auto& s : background) {
    int prev = b->bos;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      const int next = i < s.size() ? b->id(s[i]) : b->eos;
      b->counts[Bigrams::key(prev, next)]++;
      b->totals[prev]++;
      prev = next;
    }
  }
  b->successors.resize(b->tokens.size());
  b->predecessors.resize(b->tokens.size());
  std::vector<std::uint64_t> keys;
  for (const auto& [k, _] : b->counts) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (auto k : keys) {
    const int prev = static_cast<int>(k >> 32), next = static_cast<int>(k & 0xffffffffULL);
    b->successors[prev].push_back(next);
    b->predecessors[next].push_back(prev);
  }
  bigrams_ = std::move(b);
}

namespace {

struct Exemplar {
  Tokens canonical;
  Tokens natural;
};

struct ParsedPrompt {
  std::vector<Exemplar> exemplars;
  Tokens target;
};

std::string strip_label(const std::string& line, const char* label) {
  return line.rfind(label, 0) == 0 ? line.substr(std::char_traits<char>::length(label)) : std::string();
}

ParsedPrompt parse_prompt(const std::string& prompt) {
  ParsedPrompt out;
  std::istringstream in(prompt);
  std::string line;
  std::optional<Tokens> pending;
  bool pending_target = false;
  while (std::getline(in, line)) {
    if (line.rfind("C:", 0) == 0) {
      pending = tokenize(strip_label(line, "C:"));
    } else if (line.rfind("N:", 0) == 0 && pending) {
      auto natural = tokenize(strip_label(line, "N:"));
      if (natural.empty()) {
        out.target = *pending;
        pending_target = true;
      } else {
        out.exemplars.push_back({*pending, std::move(natural)});
      }
      pending.reset();
    }
  }
  if (!pending_target || out.target.empty() || out.exemplars.empty())
    throw RemoteError(RemoteError::Kind::kMalformedResponse,
                      "simulator prompt needs C:/N: exemplars and a final canonical with an empty N: line");
  return out;
}

// Levenshtein alignment as a list of (source span, target span) runs of
// non-matching tokens, in order.
std::vector<std::pair<std::pair<std::size_t, std::size_t>, std::pair<std::size_t, std::size_t>>> diff_runs(
    const Tokens& a, const Tokens& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  // Backtrace, marking matched pairs.
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  for (std::size_t i = n, j = m; i > 0 || j > 0;) {
    if (i > 0 && j > 0 && a[i - 1] == b[j - 1] && d[i][j] == d[i - 1][j - 1]) {
      matches.emplace_back(i - 1, j - 1);
      --i, --j;
    } else if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1) {
      --i, --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(matches.begin(), matches.end());
  matches.emplace_back(n, m);  // sentinel
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, std::pair<std::size_t, std::size_t>>> runs;
  std::size_t pa = 0, pb = 0;
  for (const auto& [ia, ib] : matches) {
    if (ia > pa || ib > pb) runs.push_back({{pa, ia}, {pb, ib}});
    pa = ia + 1, pb = ib + 1;
  }
  return runs;
}

std::size_t token_edit_distance(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

Tokens without_quotes(std::span<const Token> t) {
  Tokens out;
  for (const auto& x : t)
    if (x != kQuote) out.push_back(x);
  return out;
}

std::optional<std::size_t> find_span(const Tokens& hay, const Tokens& needle, std::size_t from = 0) {
  if (needle.empty() || needle.size() > hay.size()) return std::nullopt;
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i)
    if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) return i;
  return std::nullopt;
}

// Rewrites the exemplar natural so that it expresses `target` instead of the
// exemplar canonical; nullopt when a differing chunk cannot be located.
// Inserted target tokens are added to `inserted`.
std::optional<Tokens> transfer(const Exemplar& ex, const Tokens& target, std::set<Token>& inserted) {
  Tokens natural = ex.natural;
  std::size_t cursor = 0;
  for (const auto& [src, tgt] : diff_runs(ex.canonical, target)) {
    const auto from = without_quotes(std::span(ex.canonical).subspan(src.first, src.second - src.first));
    const auto to = without_quotes(std::span(target).subspan(tgt.first, tgt.second - tgt.first));
    if (from.empty() && to.empty()) continue;
    inserted.insert(to.begin(), to.end());
    if (!from.empty()) {
      auto pos = find_span(natural, from, cursor);
      if (!pos) pos = find_span(natural, from);
      if (!pos) return std::nullopt;
      natural.erase(natural.begin() + static_cast<std::ptrdiff_t>(*pos),
                    natural.begin() + static_cast<std::ptrdiff_t>(*pos + from.size()));
      natural.insert(natural.begin() + static_cast<std::ptrdiff_t>(*pos), to.begin(), to.end());
      cursor = *pos + to.size();
      continue;
    }
    // Pure insertion: place after the preceding canonical token, if the
    // natural contains it.
    if (src.first == 0) return std::nullopt;
    auto anchor = find_span(natural, Tokens{ex.canonical[src.first - 1]});
    if (!anchor) return std::nullopt;
    natural.insert(natural.begin() + static_cast<std::ptrdiff_t>(*anchor + 1), to.begin(), to.end());
    cursor = *anchor + 1 + to.size();
  }
  return natural;
}

// Indices of background sentences containing every token of `required`.
std::vector<std::size_t> sentences_with(const std::unordered_map<Token, std::vector<std::size_t>>& containing,
                                        std::size_t n_sentences, const std::set<Token>& required) {
  std::vector<std::size_t> out(n_sentences);
  std::iota(out.begin(), out.end(), std::size_t{0});
  for (const auto& t : required) {
    auto it = containing.find(t);
    if (it == containing.end()) return {};
    std::vector<std::size_t> kept;
    std::set_intersection(out.begin(), out.end(), it->second.begin(), it->second.end(), std::back_inserter(kept));
    out = std::move(kept);
  }
  return out;
}

// Index drawn with probability proportional to exp(-(d - d_min) / T).
std::size_t softmin_pick(const std::vector<double>& dist, double temperature, Rng& rng) {
  const double best = *std::min_element(dist.begin(), dist.end());
  std::vector<double> weight;
  for (double d : dist) weight.push_back(std::exp(-(d - best) / temperature));
  double r = uniform_unit(rng) * std::accumulate(weight.begin(), weight.end(), 0.0);
  for (std::size_t i = 0; i < weight.size(); ++i) {
    if (r < weight[i]) return i;
    r -= weight[i];
  }
  return weight.size() - 1;
}

}  // namespace

std::vector<std::string> SimulatorBackend::complete(const CompletionRequest& req) {
  const auto body = req.canonical_body();
  const auto parsed = parse_prompt(req.prompt);
  const auto& b = *bigrams_;
  Rng rng(derive_seed(cfg_.seed, fnv1a64(body)));

  // Exemplars are drawn by softmin over their canonical edit distance, so low
  // temperatures stay with the nearest ones.
  const double temperature = std::max(req.temperature, 1e-3);
  std::vector<double> dist;
  for (const auto& ex : parsed.exemplars)
    dist.push_back(static_cast<double>(token_edit_distance(ex.canonical, parsed.target)));

  // Quoted target content is copied verbatim, never resampled.
  std::set<Token> quoted;
  for (std::size_t i = 0, open = 0; i < parsed.target.size(); ++i) {
    if (parsed.target[i] == kQuote) open ^= 1;
    else if (open) quoted.insert(parsed.target[i]);
  }

  const double rate = std::min(1.0, cfg_.resample_rate * req.temperature);
  std::vector<std::string> out;
  for (int s = 0; s < req.n_samples; ++s) {
    const auto& ex = parsed.exemplars[softmin_pick(dist, temperature, rng)];
    auto protected_tokens = quoted;
    std::set<Token> inserted;
    Tokens natural = without_quotes(parsed.target);
    if (auto t = transfer(ex, parsed.target, inserted)) {
      natural = std::move(*t);
      protected_tokens.insert(inserted.begin(), inserted.end());
    }
    // Recall: reuse the phrasing of a background sentence that mentions all
    // target content, preferring those close to the transferred natural.
    if (uniform_unit(rng) < cfg_.recall_rate) {
      const auto ids = sentences_with(b.containing, b.sentences.size(), protected_tokens);
      if (!ids.empty()) {
        std::vector<double> d;
        for (auto i : ids) d.push_back(static_cast<double>(token_edit_distance(natural, b.sentences[i])));
        natural = b.sentences[ids[softmin_pick(d, temperature, rng)]];
      }
    }
    // Each resampled token is replaced by a path of zero to two background
    // words between its neighbours, weighted by the bigram chain.
    for (std::size_t j = 0; j < natural.size();) {
      const int cur = b.id(natural[j]);
      if (cur < 0 || protected_tokens.count(natural[j]) || uniform_unit(rng) >= rate) {
        ++j;
        continue;
      }
      const int prev = j == 0 ? b.bos : b.id(natural[j - 1]);
      const int next = j + 1 == natural.size() ? b.eos : b.id(natural[j + 1]);
      if (prev < 0 || next < 0) {
        ++j;
        continue;
      }
      const auto paths = b.paths(prev, next, natural.size() > 1);
      if (paths.empty()) {
        ++j;
        continue;
      }
      std::vector<double> w(paths.size());
      double peak = -1e300;
      for (std::size_t c = 0; c < paths.size(); ++c) peak = std::max(peak, w[c] = paths[c].second / temperature);
      double total = 0.0;
      for (auto& x : w) total += x = std::exp(x - peak);
      double r = uniform_unit(rng) * total;
      std::size_t pick = paths.size() - 1;
      for (std::size_t c = 0; c < paths.size(); ++c) {
        if (r < w[c]) {
          pick = c;
          break;
        }
        r -= w[c];
      }
      const auto& path = paths[pick].first;
      natural.erase(natural.begin() + static_cast<std::ptrdiff_t>(j));
      for (std::size_t k = 0; k < path.size(); ++k)
        natural.insert(natural.begin() + static_cast<std::ptrdiff_t>(j + k), b.tokens[path[k]]);
      j += path.size();
    }
    if (static_cast<int>(natural.size()) > req.max_tokens) natural.resize(static_cast<std::size_t>(req.max_tokens));
    // Like a real LM, keep going past the line; the stop string trims it.
    out.push_back(truncate_at_stop(join(natural) + "\nC: ", req.stop));
  }
  return out;
}

}  // namespace privaug
