#include "privaug/parser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "privaug/pii.hpp"
#include "privaug/recognizer.hpp"

namespace privaug {

namespace {

constexpr double kChannelFloor = 1e-12;

std::string placeholder(const std::string& category) { return "<" + category + ">"; }

void delex_canonical(const Derivation& d, Tokens& out) {
  std::size_t child = 0;
  for (const auto& sym : d.production->canonical_rhs) {
    if (sym.is_terminal()) {
      out.push_back(sym.name);
    } else if (sym.is_slot()) {
      out.push_back(placeholder(d.children[child++].slot().category));
    } else {
      delex_canonical(d.children[child++].derivation(), out);
    }
  }
}

// Marks unmasked, non-overlapping occurrences of `value` with `label`.
void mask_occurrences(const Tokens& natural, const Tokens& value, int label, std::vector<int>& mask) {
  if (value.empty() || value.size() > natural.size()) return;
  for (std::size_t i = 0; i + value.size() <= natural.size();) {
    bool hit = true;
    for (std::size_t k = 0; k < value.size() && hit; ++k) hit = mask[i + k] < 0 && natural[i + k] == value[k];
    if (!hit) {
      ++i;
      continue;
    }
    for (std::size_t k = 0; k < value.size(); ++k) mask[i + k] = label;
    i += value.size();
  }
}

}  // namespace

ParallelPair delexicalize(const Derivation& d, const Tokens& natural) {
  ParallelPair out;
  delex_canonical(d, out.canonical);
  auto spans = detect_pii(d);
  // Longer values first so a value never masks part of a longer one.
  std::stable_sort(spans.begin(), spans.end(),
                   [](const PIISpan& a, const PIISpan& b) { return a.value.size() > b.value.size(); });
  std::vector<int> mask(natural.size(), -1);
  for (std::size_t s = 0; s < spans.size(); ++s) mask_occurrences(natural, spans[s].value, static_cast<int>(s), mask);
  out.natural.reserve(natural.size());
  for (std::size_t i = 0; i < natural.size(); ++i)
    out.natural.push_back(mask[i] < 0 ? natural[i] : placeholder(spans[mask[i]].category));
  return out;
}

NoisyChannelParser::NoisyChannelParser(Grammar grammar, ReplacementPools pools, NGramModel prior,
                                       TranslationTable channel, ParserConfig cfg)
    : grammar_(std::move(grammar)),
      pools_(std::move(pools)),
      prior_(std::move(prior)),
      channel_(std::move(channel)),
      cfg_(cfg) {
  if (cfg_.beam_width < 1 || cfg_.max_symbols < 1 || cfg_.max_slot_span < 1)
    throw DataError("parser config: beam_width, max_symbols and max_slot_span must be >= 1");
  for (const auto& t : grammar_.terminals())
    if (!prior_.in_vocabulary(t)) throw DataError("parser prior lacks grammar terminal '" + t + "'");
}

std::vector<Tokens> NoisyChannelParser::slot_candidates(const std::string& category, const Tokens& natural) const {
  std::set<Tokens> out;
  if (pools_.has(category))
    for (const auto& v : pools_.values(category)) out.insert(v);
  std::vector<std::size_t> quotes;
  for (std::size_t i = 0; i < natural.size(); ++i)
    if (natural[i] == kQuote) quotes.push_back(i);
  for (std::size_t q = 0; q + 1 < quotes.size(); q += 2)
    if (quotes[q + 1] > quotes[q] + 1)
      out.insert(Tokens(natural.begin() + static_cast<std::ptrdiff_t>(quotes[q]) + 1,
                        natural.begin() + static_cast<std::ptrdiff_t>(quotes[q + 1])));
  auto unknown = [&](const Token& t) {
    return t != kQuote && !channel_.has_natural(t) && grammar_.terminal_id(t) < 0;
  };
  const auto max_span = static_cast<std::size_t>(cfg_.max_slot_span);
  for (std::size_t i = 0; i < natural.size(); ++i) {
    for (std::size_t len = 1; len <= max_span && i + len <= natural.size() && unknown(natural[i + len - 1]); ++len)
      out.insert(Tokens(natural.begin() + static_cast<std::ptrdiff_t>(i),
                        natural.begin() + static_cast<std::ptrdiff_t>(i + len)));
  }
  return {out.begin(), out.end()};
}

NoisyChannelParser train_parser(const std::vector<ParallelPair>& data, const Grammar& grammar,
                                const ReplacementPools& pools, const ParserConfig& cfg) {
  if (data.empty()) throw DataError("train_parser: empty dataset");
  std::vector<ParallelPair> delex;
  delex.reserve(data.size());
  std::vector<Tokens> canonicals;
  for (const auto& pair : data) {
    delex.push_back(delexicalize(parse_canonical(grammar, pair.canonical), pair.natural));
    canonicals.push_back(delex.back().canonical);
  }
  auto extra = grammar.terminals();
  for (const auto& cat : grammar.slot_categories()) extra.insert(placeholder(cat));
  auto prior = train_ngram(canonicals, cfg.prior_order, cfg.prior_alpha, extra);
  // A corpus whose naturals are all empty has no channel to estimate; the
  // parser then relies on the prior alone.
  const bool any_natural = std::any_of(delex.begin(), delex.end(), [](const auto& p) { return !p.natural.empty(); });
  auto channel = any_natural ? model1_em(delex, cfg.em_iterations) : TranslationTable{};
  return NoisyChannelParser(grammar, pools, std::move(prior), std::move(channel), cfg);
}

namespace {

double channel_logprob(const TranslationTable& t, const Tokens& natural, const Tokens& canonical) {
  std::vector<int> cids;
  cids.reserve(canonical.size() + 1);
  for (const auto& c : canonical) cids.push_back(t.canonical_id(c));
  cids.push_back(t.canonical_id(Token(kNull)));
  const double len = static_cast<double>(cids.size());
  double total = 0.0;
  for (const auto& n : natural) {
    const int nid = t.natural_id(n);
    double sum = 0.0;
    for (int c : cids) sum += t.prob_ids(c, nid);
    total += std::log(std::max(kChannelFloor, sum / len));
  }
  return total;
}

}  // namespace

double score_parse(const NoisyChannelParser& p, const Tokens& natural, const Tokens& canonical) {
  const auto d = parse_canonical(p.grammar(), canonical);
  const auto pair = delexicalize(d, natural);
  return sequence_logprob(p.prior(), pair.canonical) + channel_logprob(p.channel(), pair.natural, pair.canonical);
}

namespace {

// Partial hypothesis of the symbol-level beam. The channel term is tracked
// per natural position as the running sum of t(n_j | c_i) over the canonical
// tokens so far plus null; masked positions use their category placeholder.
struct Hyp {
  EarleyState state;
  Tokens canonical;
  Tokens delex;
  double prior_lp = 0.0;
  std::vector<double> acc;
  std::vector<double> cat_acc;
  std::vector<int> mask;
  double score = 0.0;
};

class BeamParser {
 public:
  BeamParser(const NoisyChannelParser& p, const Tokens& natural) : p_(p), natural_(natural) {
    const auto& t = p.channel();
    const auto& g = p.grammar();
    nat_ids_.reserve(natural.size());
    for (const auto& n : natural) nat_ids_.push_back(t.natural_id(n));
    for (std::size_t s = 0; s < g.num_slots(); ++s) {
      const auto& cat = g.slot_name(static_cast<int>(s));
      cat_ids_.push_back(t.natural_id(placeholder(cat)));
      candidates_.push_back(p.slot_candidates(cat, natural));
    }
  }

  Hyp initial() const {
    Hyp h{EarleyState(p_.grammar()), {}, {}, 0.0, {}, {}, std::vector<int>(natural_.size(), -1), 0.0};
    h.acc.assign(natural_.size(), 0.0);
    h.cat_acc.assign(cat_ids_.size(), 0.0);
    add_channel(h, Token(kNull));
    rescore(h);
    return h;
  }

  std::vector<Hyp> expand(const Hyp& h) const {
    std::vector<Hyp> out;
    for (int term : h.state.next_terminals()) {
      auto next = h.state.scan_terminal(term);
      if (!next) continue;
      const auto& tok = p_.grammar().terminal_token(term);
      Hyp c = h;
      c.state = std::move(*next);
      c.canonical.push_back(tok);
      push_canonical(c, tok);
      out.push_back(std::move(c));
    }
    for (int slot : h.state.next_slots()) {
      auto next = h.state.scan_slot(slot);
      if (!next) continue;
      const auto ph = placeholder(p_.grammar().slot_name(slot));
      for (const auto& value : candidates_[slot]) {
        Hyp c = h;
        c.state = *next;
        c.canonical.insert(c.canonical.end(), value.begin(), value.end());
        mask_occurrences(natural_, value, slot, c.mask);
        push_canonical(c, ph);
        out.push_back(std::move(c));
      }
    }
    return out;
  }

  double finished_score(const Hyp& h) const {
    return h.score + p_.prior().logprob(h.delex, Token(kEos));
  }

 private:
  void add_channel(Hyp& h, const Token& canonical_token) const {
    const auto& t = p_.channel();
    const int cid = t.canonical_id(canonical_token);
    if (cid < 0) return;
    for (std::size_t j = 0; j < nat_ids_.size(); ++j) h.acc[j] += t.prob_ids(cid, nat_ids_[j]);
    for (std::size_t s = 0; s < cat_ids_.size(); ++s) h.cat_acc[s] += t.prob_ids(cid, cat_ids_[s]);
  }

  void push_canonical(Hyp& h, const Token& delex_token) const {
    h.prior_lp += p_.prior().logprob(h.delex, delex_token);
    h.delex.push_back(delex_token);
    add_channel(h, delex_token);
    rescore(h);
  }

  void rescore(Hyp& h) const {
    const double len = static_cast<double>(h.delex.size() + 1);
    double channel = 0.0;
    for (std::size_t j = 0; j < natural_.size(); ++j) {
      const double sum = h.mask[j] < 0 ? h.acc[j] : h.cat_acc[h.mask[j]];
      channel += std::log(std::max(kChannelFloor, sum / len));
    }
    h.score = h.prior_lp + channel;
  }

  const NoisyChannelParser& p_;
  const Tokens& natural_;
  std::vector<int> nat_ids_;
  std::vector<int> cat_ids_;
  std::vector<std::vector<Tokens>> candidates_;
};

bool better(double sa, const Tokens& ta, double sb, const Tokens& tb) {
  if (sa != sb) return sa > sb;
  return ta < tb;
}

}  // namespace

std::vector<ParseResult> parse_kbest(const NoisyChannelParser& p, const Tokens& natural, std::size_t k) {
  BeamParser beam(p, natural);
  const auto width = static_cast<std::size_t>(p.config().beam_width);
  std::vector<Hyp> live{beam.initial()};
  std::map<Tokens, double> finished;  // canonical -> best completed partial score

  for (int step = 0; step <= p.config().max_symbols && !live.empty(); ++step) {
    std::vector<Hyp> next;
    for (const auto& h : live) {
      if (h.state.accepts()) {
        const double s = beam.finished_score(h);
        auto [it, inserted] = finished.emplace(h.canonical, s);
        if (!inserted) it->second = std::max(it->second, s);
      }
      if (step == p.config().max_symbols) continue;
      auto children = beam.expand(h);
      for (auto& c : children) next.push_back(std::move(c));
    }
    std::sort(next.begin(), next.end(),
              [](const Hyp& a, const Hyp& b) { return better(a.score, a.canonical, b.score, b.canonical); });
    if (next.size() > width) next.erase(next.begin() + static_cast<std::ptrdiff_t>(width), next.end());
    live = std::move(next);
  }
  if (finished.empty()) throw DecodeError(DecodeError::Kind::kEmptyResult, "no canonical utterance completed");

  // Rank the best completed candidates by the exact score.
  std::vector<std::pair<double, Tokens>> shortlist;
  for (const auto& [tokens, s] : finished) shortlist.emplace_back(s, tokens);
  std::sort(shortlist.begin(), shortlist.end(),
            [](const auto& a, const auto& b) { return better(a.first, a.second, b.first, b.second); });
  if (shortlist.size() > width) shortlist.resize(width);

  std::vector<std::pair<double, Tokens>> exact;
  for (auto& [_, tokens] : shortlist) exact.emplace_back(score_parse(p, natural, tokens), std::move(tokens));
  std::sort(exact.begin(), exact.end(),
            [](const auto& a, const auto& b) { return better(a.first, a.second, b.first, b.second); });
  if (exact.size() > k) exact.resize(k);
  std::vector<ParseResult> out;
  for (auto& [s, tokens] : exact) {
    auto d = parse_canonical(p.grammar(), tokens);
    out.push_back({std::move(tokens), std::move(d), s});
  }
  return out;
}

ParseResult parse_top1(const NoisyChannelParser& p, const Tokens& natural) {
  return std::move(parse_kbest(p, natural, 1).front());
}

double parse_posterior(const NoisyChannelParser& p, const Tokens& natural, const Tokens& canonical) {
  const double own = score_parse(p, natural, canonical);
  std::vector<double> scores{own};
  try {
    for (const auto& r : parse_kbest(p, natural, static_cast<std::size_t>(p.config().beam_width)))
      if (r.canonical != canonical) scores.push_back(r.logprob);
  } catch (const DecodeError&) {
  }
  const double peak = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - peak);
  return own - peak - std::log(z);
}

std::string NoisyChannelParser::serialize() const {
  nlohmann::json j;
  j["format"] = "privaug-parser";
  j["version"] = 1;
  j["grammar_fingerprint"] = grammar_.fingerprint();
  j["config"] = {{"prior_order", cfg_.prior_order},   {"prior_alpha", cfg_.prior_alpha},
                 {"em_iterations", cfg_.em_iterations}, {"beam_width", cfg_.beam_width},
                 {"max_symbols", cfg_.max_symbols},   {"max_slot_span", cfg_.max_slot_span}};
  j["prior"] = nlohmann::json::parse(prior_.serialize());
  auto channel = nlohmann::json::array();
  for (const auto& [c, n, prob] : channel_.entries()) channel.push_back({c, n, prob});
  j["channel"] = std::move(channel);
  const auto bytes = nlohmann::json::to_cbor(j);
  return std::string(bytes.begin(), bytes.end());
}

void NoisyChannelParser::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write parser file " + path.string());
  out << serialize();
}

NoisyChannelParser NoisyChannelParser::deserialize(const std::string& bytes, Grammar grammar, ReplacementPools pools) {
  nlohmann::json j;
  try {
    j = nlohmann::json::from_cbor(bytes);
    if (j.at("format") != "privaug-parser" || j.at("version") != 1) throw DataError("not a parser file");
    if (j.at("grammar_fingerprint") != grammar.fingerprint())
      throw DataError("parser was trained for a different grammar (fingerprint " +
                      j.at("grammar_fingerprint").get<std::string>() + ", expected " + grammar.fingerprint() + ")");
    ParserConfig cfg;
    const auto& c = j.at("config");
    cfg.prior_order = c.at("prior_order");
    cfg.prior_alpha = c.at("prior_alpha");
    cfg.em_iterations = c.at("em_iterations");
    cfg.beam_width = c.at("beam_width");
    cfg.max_symbols = c.at("max_symbols");
    cfg.max_slot_span = c.at("max_slot_span");
    auto prior = NGramModel::deserialize(j.at("prior").dump());
    std::vector<std::tuple<Token, Token, double>> entries;
    for (const auto& e : j.at("channel")) entries.emplace_back(e.at(0), e.at(1), e.at(2));
    return NoisyChannelParser(std::move(grammar), std::move(pools), std::move(prior),
                              TranslationTable::from_entries(entries), cfg);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed parser file: ") + e.what());
  }
}

NoisyChannelParser NoisyChannelParser::load(const std::filesystem::path& path, Grammar grammar,
                                            ReplacementPools pools) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read parser file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str(), std::move(grammar), std::move(pools));
}

}  // namespace privaug
