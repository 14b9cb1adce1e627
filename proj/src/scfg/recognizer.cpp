#include "privaug/recognizer.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "grammar_data.hpp"

namespace privaug {

using Data = Grammar::Data;
using Kind = Symbol::Kind;

struct EarleyState::Set {
  struct Item {
    int prod;
    int dot;
    int origin;
  };
  std::vector<Item> items;
  std::unordered_set<std::uint64_t> keys;
  std::unordered_map<int, std::vector<int>> waiting;  // nonterminal -> items expecting it
  std::vector<int> terminals;
  std::vector<int> slots;
  bool accepting = false;

  bool add(Item it) {
    const auto key = (static_cast<std::uint64_t>(it.prod) << 40) | (static_cast<std::uint64_t>(it.dot) << 24) |
                     static_cast<std::uint64_t>(it.origin);
    if (!keys.insert(key).second) return false;
    items.push_back(it);
    return true;
  }
};

namespace {

using SetPtr = std::shared_ptr<const EarleyState::Set>;

// Runs prediction and completion on `set` (position k) and indexes it.
void close_set(const Data& g, const std::vector<SetPtr>& chart, EarleyState::Set& set) {
  const int k = static_cast<int>(chart.size());
  for (std::size_t w = 0; w < set.items.size(); ++w) {
    const auto it = set.items[w];
    const auto& rhs = g.prods[it.prod].rhs;
    if (it.dot < static_cast<int>(rhs.size())) {
      const auto& sym = rhs[it.dot];
      if (sym.kind == Kind::kNonterminal)
        for (int p : g.recognizer_prods[sym.id]) set.add({p, 0, k});
      continue;
    }
    const int lhs = g.prods[it.prod].lhs;
    const auto& origin = *chart[it.origin];
    auto found = origin.waiting.find(lhs);
    if (found == origin.waiting.end()) continue;
    for (int idx : found->second) {
      const auto& parent = origin.items[idx];
      set.add({parent.prod, parent.dot + 1, parent.origin});
    }
  }
  for (int i = 0; i < static_cast<int>(set.items.size()); ++i) {
    const auto& it = set.items[i];
    const auto& prod = g.prods[it.prod];
    if (it.dot == static_cast<int>(prod.rhs.size())) {
      if (it.origin == 0 && prod.lhs == g.start_id) set.accepting = true;
      continue;
    }
    const auto& sym = prod.rhs[it.dot];
    if (sym.kind == Kind::kNonterminal) set.waiting[sym.id].push_back(i);
    else if (sym.kind == Kind::kTerminal) set.terminals.push_back(sym.id);
    else set.slots.push_back(sym.id);
  }
  for (auto* v : {&set.terminals, &set.slots}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
}

}  // namespace

EarleyState::EarleyState(Grammar g) : grammar_(std::move(g)) {
  const auto& data = *grammar_.data();
  auto set = std::make_shared<Set>();
  for (int p : data.recognizer_prods[data.start_id]) set->add({p, 0, 0});
  close_set(data, chart_, *set);
  chart_.push_back(std::move(set));
}

bool EarleyState::accepts() const { return chart_.back()->accepting; }
bool EarleyState::dead() const { return chart_.back()->items.empty(); }
std::vector<int> EarleyState::next_terminals() const { return chart_.back()->terminals; }
std::vector<int> EarleyState::next_slots() const { return chart_.back()->slots; }

std::optional<EarleyState> EarleyState::scan(int kind, int id) const {
  const auto& data = *grammar_.data();
  const auto want = static_cast<Kind>(kind);
  auto set = std::make_shared<Set>();
  for (const auto& it : chart_.back()->items) {
    const auto& rhs = data.prods[it.prod].rhs;
    if (it.dot < static_cast<int>(rhs.size()) && rhs[it.dot].kind == want && rhs[it.dot].id == id)
      set->add({it.prod, it.dot + 1, it.origin});
  }
  if (set->items.empty()) return std::nullopt;
  close_set(data, chart_, *set);
  auto chart = chart_;
  chart.push_back(std::move(set));
  return EarleyState(grammar_, std::move(chart));
}

std::optional<EarleyState> EarleyState::scan_terminal(int terminal_id) const {
  return scan(static_cast<int>(Kind::kTerminal), terminal_id);
}

std::optional<EarleyState> EarleyState::scan_slot(int slot_id) const {
  return scan(static_cast<int>(Kind::kSlot), slot_id);
}

SlotLexicon::SlotLexicon(const Grammar& g, const ReplacementPools& pools) {
  values_.resize(g.num_slots());
  for (std::size_t s = 0; s < g.num_slots(); ++s) {
    const auto& name = g.slot_name(static_cast<int>(s));
    if (pools.has(name)) values_[s] = pools.values(name);
  }
}

PrefixAutomaton::PrefixAutomaton(const Grammar& g, std::shared_ptr<const SlotLexicon> lexicon)
    : grammar_(g), lexicon_(std::move(lexicon)) {
  EarleyState start(g);
  if (!start.dead()) configs_.push_back({std::move(start), -1, {}, {}});
}

namespace {

bool has_prefix(const Tokens& value, const Tokens& prefix) {
  return value.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), value.begin());
}

}  // namespace

// In-slot configurations whose partial value is a complete pool value also
// commit the slot; those with no longer matching value are dropped.
void PrefixAutomaton::add_normalized(std::vector<Config>& out, Config cfg) const {
  auto same = [&](const Config& c) {
    return c.slot == cfg.slot && c.history == cfg.history && c.partial == cfg.partial;
  };
  if (cfg.slot < 0) {
    if (std::none_of(out.begin(), out.end(), same)) out.push_back(std::move(cfg));
    return;
  }
  bool complete = false, extendable = false;
  for (const auto& v : lexicon_->values(cfg.slot)) {
    if (!has_prefix(v, cfg.partial)) continue;
    if (v.size() == cfg.partial.size()) complete = true;
    else extendable = true;
  }
  if (complete) {
    if (auto next = cfg.state.scan_slot(cfg.slot)) {
      Config committed{std::move(*next), -1, {}, cfg.history};
      committed.history.push_back(-(cfg.slot + 1));
      add_normalized(out, std::move(committed));
    }
  }
  if (extendable && std::none_of(out.begin(), out.end(), same)) out.push_back(std::move(cfg));
}

std::set<Token> PrefixAutomaton::allowed() const {
  std::set<Token> out;
  for (const auto& cfg : configs_) {
    if (cfg.slot >= 0) {
      for (const auto& v : lexicon_->values(cfg.slot))
        if (v.size() > cfg.partial.size() && has_prefix(v, cfg.partial)) out.insert(v[cfg.partial.size()]);
      continue;
    }
    for (int t : cfg.state.next_terminals()) out.insert(grammar_.terminal_token(t));
    for (int s : cfg.state.next_slots())
      for (const auto& v : lexicon_->values(s)) out.insert(v.front());
  }
  return out;
}

bool PrefixAutomaton::can_end() const {
  return std::any_of(configs_.begin(), configs_.end(),
                     [](const Config& c) { return c.slot < 0 && c.state.accepts(); });
}

PrefixAutomaton PrefixAutomaton::advance(const Token& token) const {
  std::vector<Config> next;
  const int tid = grammar_.terminal_id(token);
  for (const auto& cfg : configs_) {
    if (cfg.slot >= 0) {
      Config c = cfg;
      c.partial.push_back(token);
      add_normalized(next, std::move(c));
      continue;
    }
    if (tid >= 0) {
      if (auto st = cfg.state.scan_terminal(tid)) {
        Config c{std::move(*st), -1, {}, cfg.history};
        c.history.push_back(tid);
        add_normalized(next, std::move(c));
      }
    }
    for (int s : cfg.state.next_slots()) {
      bool starts = std::any_of(lexicon_->values(s).begin(), lexicon_->values(s).end(),
                                [&](const Tokens& v) { return v.front() == token; });
      if (starts) add_normalized(next, Config{cfg.state, s, {token}, cfg.history});
    }
  }
  return PrefixAutomaton(grammar_, lexicon_, std::move(next));
}

PrefixAllowed prefix_allowed(const Grammar& g, const ReplacementPools& pools, std::span<const Token> prefix) {
  PrefixAutomaton automaton(g, std::make_shared<const SlotLexicon>(g, pools));
  for (const auto& tok : prefix) {
    automaton = automaton.advance(tok);
    if (automaton.dead()) return {};
  }
  return {automaton.allowed(), automaton.can_end()};
}

}  // namespace privaug
