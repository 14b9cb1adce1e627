#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "privaug/lm.hpp"

namespace privaug {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

double TokenDistribution::logprob(const Token& t) const {
  auto it = entries.find(t);
  return it == entries.end() ? kNegInf : it->second;
}

double TokenDistribution::normalization_error() const {
  double total = 0.0;
  for (const auto& [_, lp] : entries) total += std::exp(lp);
  return std::abs(total - 1.0);
}

std::vector<double> TokenLM::score_candidates(std::span<const Token> prefix,
                                              std::span<const Token> candidates) const {
  const auto dist = next_token_logprobs(prefix);
  const double unk = dist.logprob(Token(kUnk));
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    auto it = dist.entries.find(c);
    out.push_back(it == dist.entries.end() ? unk : it->second);
  }
  return out;
}

UniformLM::UniformLM(const std::set<Token>& vocabulary) : vocab_(vocabulary) {
  vocab_.insert(Token(kBos));
  vocab_.insert(Token(kEos));
  vocab_.insert(Token(kUnk));
}

TokenDistribution UniformLM::next_token_logprobs(std::span<const Token>) const {
  TokenDistribution d;
  const double lp = -std::log(static_cast<double>(vocab_.size()));
  for (const auto& t : vocab_) d.entries.emplace(t, lp);
  return d;
}

std::vector<double> UniformLM::score_candidates(std::span<const Token>, std::span<const Token> candidates) const {
  return std::vector<double>(candidates.size(), -std::log(static_cast<double>(vocab_.size())));
}

std::size_t NGramModel::VecHash::operator()(const std::vector<int>& v) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int x : v) {
    h ^= static_cast<std::uint32_t>(x);
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h);
}

int NGramModel::id_of(const Token& t) const {
  auto it = ids_.find(t);
  return it == ids_.end() ? ids_.at(Token(kUnk)) : it->second;
}

int NGramModel::intern(const Token& t) {
  auto [it, inserted] = ids_.emplace(t, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(t);
  return it->second;
}

std::vector<Token> NGramModel::vocabulary() const {
  auto v = tokens_;
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<int> NGramModel::history(std::span<const Token> prefix) const {
  const int bos = ids_.at(Token(kBos));
  const std::size_t need = static_cast<std::size_t>(order_ - 1);
  std::vector<int> hist;
  hist.reserve(need);
  // Walk back from the end until the history is full or a sentence starts.
  std::size_t i = prefix.size();
  while (hist.size() < need && i > 0) {
    const auto& tok = prefix[--i];
    if (tok == kBos) break;
    hist.push_back(id_of(tok));
  }
  while (hist.size() < need) hist.push_back(bos);
  std::reverse(hist.begin(), hist.end());
  return hist;
}

const NGramModel::Context& NGramModel::backoff(const std::vector<int>& hist) const {
  std::vector<int> key;
  for (std::size_t skip = 0; skip <= hist.size(); ++skip) {
    key.assign(hist.begin() + static_cast<std::ptrdiff_t>(skip), hist.end());
    auto it = contexts_.find(key);
    if (it != contexts_.end() && it->second.total > 0) return it->second;
  }
  return contexts_.at({});
}

double NGramModel::logprob_id(const Context& ctx, int id) const {
  auto it = ctx.counts.find(id);
  const double c = it == ctx.counts.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((c + alpha_) / (static_cast<double>(ctx.total) + alpha_ * static_cast<double>(tokens_.size())));
}

double NGramModel::logprob(std::span<const Token> prefix, const Token& t) const {
  return logprob_id(backoff(history(prefix)), id_of(t));
}

TokenDistribution NGramModel::next_token_logprobs(std::span<const Token> prefix) const {
  const auto& ctx = backoff(history(prefix));
  TokenDistribution d;
  for (std::size_t id = 0; id < tokens_.size(); ++id)
    d.entries.emplace(tokens_[id], logprob_id(ctx, static_cast<int>(id)));
  return d;
}

std::vector<double> NGramModel::score_candidates(std::span<const Token> prefix,
                                                 std::span<const Token> candidates) const {
  const auto& ctx = backoff(history(prefix));
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(logprob_id(ctx, id_of(c)));
  return out;
}

std::size_t NGramModel::context_count(std::span<const Token> context) const {
  std::vector<int> key;
  for (const auto& t : context) {
    auto it = ids_.find(t);
    if (it == ids_.end()) return 0;
    key.push_back(it->second);
  }
  auto it = contexts_.find(key);
  return it == contexts_.end() ? 0 : it->second.total;
}

NGramModel train_ngram(const std::vector<Tokens>& corpus, int order, double smoothing_alpha,
                       const std::set<Token>& extra_vocabulary) {
  if (corpus.empty()) throw DataError("train_ngram: empty corpus");
  if (order < 1) throw DataError("train_ngram: order must be >= 1");
  if (!(smoothing_alpha > 0.0)) throw DataError("train_ngram: smoothing alpha must be positive");
  NGramModel m;
  m.order_ = order;
  m.alpha_ = smoothing_alpha;
  // Interning in sorted order makes ids independent of corpus order.
  std::set<Token> vocab(extra_vocabulary.begin(), extra_vocabulary.end());
  for (const auto& s : corpus) vocab.insert(s.begin(), s.end());
  vocab.insert(Token(kBos));
  vocab.insert(Token(kEos));
  vocab.insert(Token(kUnk));
  for (const auto& t : vocab) m.intern(t);

  const int bos = m.ids_.at(Token(kBos));
  const int eos = m.ids_.at(Token(kEos));
  m.contexts_[{}];
  std::vector<int> padded;
  for (const auto& s : corpus) {
    padded.assign(static_cast<std::size_t>(order - 1), bos);
    for (const auto& t : s) padded.push_back(m.id_of(t));
    padded.push_back(eos);
    for (std::size_t i = static_cast<std::size_t>(order - 1); i < padded.size(); ++i) {
      for (int k = 0; k < order; ++k) {
        std::vector<int> ctx(padded.begin() + static_cast<std::ptrdiff_t>(i) - k,
                             padded.begin() + static_cast<std::ptrdiff_t>(i));
        auto& entry = m.contexts_[ctx];
        entry.total++;
        entry.counts[padded[i]]++;
      }
    }
  }
  return m;
}

double sequence_logprob(const NGramModel& m, std::span<const Token> tokens) {
  double total = 0.0;
  Tokens prefix;
  prefix.reserve(tokens.size());
  for (const auto& t : tokens) {
    total += m.logprob(prefix, t);
    prefix.push_back(t);
  }
  return total + m.logprob(prefix, Token(kEos));
}

std::string NGramModel::serialize() const {
  nlohmann::ordered_json j;
  j["order"] = order_;
  j["smoothing_alpha"] = alpha_;
  j["vocabulary"] = tokens_;
  // Contexts sorted so equal models serialize identically.
  std::vector<std::pair<std::vector<int>, const Context*>> sorted;
  for (const auto& [k, v] : contexts_) sorted.emplace_back(k, &v);
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  auto contexts = nlohmann::ordered_json::array();
  for (const auto& [key, ctx] : sorted) {
    std::vector<std::pair<int, std::size_t>> counts(ctx->counts.begin(), ctx->counts.end());
    std::sort(counts.begin(), counts.end());
    contexts.push_back({{"context", key}, {"counts", counts}});
  }
  j["contexts"] = std::move(contexts);
  return j.dump();
}

NGramModel NGramModel::deserialize(std::string_view data) {
  NGramModel m;
  try {
    const auto j = nlohmann::json::parse(data);
    m.order_ = j.at("order").get<int>();
    m.alpha_ = j.at("smoothing_alpha").get<double>();
    for (const auto& t : j.at("vocabulary").get<std::vector<Token>>()) m.intern(t);
    for (const auto& c : j.at("contexts")) {
      auto& ctx = m.contexts_[c.at("context").get<std::vector<int>>()];
      for (const auto& [id, n] : c.at("counts").get<std::vector<std::pair<int, std::size_t>>>()) {
        if (id < 0 || static_cast<std::size_t>(id) >= m.tokens_.size() || n == 0)
          throw DataError("n-gram model: bad count entry");
        ctx.counts[id] = n;
        ctx.total += n;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("n-gram model: ") + e.what());
  }
  for (const auto* marker : {&kBos, &kEos, &kUnk})
    if (!m.ids_.count(Token(*marker))) throw DataError("n-gram model: vocabulary lacks a reserved marker");
  if (m.order_ < 1 || !(m.alpha_ > 0.0) || !m.contexts_.count({}))
    throw DataError("n-gram model: invalid header");
  return m;
}

}  // namespace privaug
