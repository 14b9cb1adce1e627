// Random sampling and exhaustive enumeration of grammar sentences.

#include <deque>
#include <limits>

#include "grammar_data.hpp"

namespace privaug {

namespace {

using Data = Grammar::Data;
using Kind = Symbol::Kind;

Derivation sample_from(const Grammar& g, const Data& data, int nt, int remaining, Rng& rng,
                       const ReplacementPools& pools) {
  std::vector<std::size_t> feasible;
  for (auto idx : g.productions_for(data.nt_names[nt]))
    if (data.production_min_depth(idx) <= remaining) feasible.push_back(idx);
  if (feasible.empty())
    throw DepthExhaustedError("no production of " + data.nt_names[nt] + " terminates within depth " +
                              std::to_string(remaining));
  const auto idx = feasible[uniform_index(rng, feasible.size())];
  Derivation d{data.productions[idx], {}};
  for (const auto& sym : data.prods[idx].rhs) {
    if (sym.kind == Kind::kTerminal) continue;
    if (sym.kind == Kind::kSlot) {
      const auto& cat = data.slot_names[sym.id];
      const auto& values = pools.values(cat);
      d.children.push_back({SlotFill{cat, values[uniform_index(rng, values.size())]}});
    } else {
      d.children.push_back({sample_from(g, data, sym.id, remaining - 1, rng, pools)});
    }
  }
  return d;
}

}  // namespace

Derivation sample_derivation(const Grammar& g, Rng& rng, int max_depth, const ReplacementPools& pools) {
  if (max_depth < 1) throw std::invalid_argument("sample_derivation: max_depth must be >= 1");
  const auto& data = *g.data();
  return sample_from(g, data, data.start_id, max_depth, rng, pools);
}

std::vector<Tokens> enumerate_language(const Grammar& g, std::size_t max_len, const ReplacementPools& pools,
                                       std::size_t frontier_cap) {
  const auto& data = *g.data();
  constexpr auto kInf = std::numeric_limits<std::size_t>::max() / 4;

  std::vector<std::size_t> slot_min(data.slot_names.size(), kInf);
  for (std::size_t s = 0; s < slot_min.size(); ++s) {
    if (!pools.has(data.slot_names[s])) continue;
    for (const auto& v : pools.values(data.slot_names[s])) slot_min[s] = std::min(slot_min[s], v.size());
  }
  std::vector<std::size_t> nt_min(data.nt_names.size(), kInf);
  auto sym_min = [&](const Data::Sym& s) {
    if (s.kind == Kind::kTerminal) return std::size_t{1};
    return s.kind == Kind::kSlot ? slot_min[s.id] : nt_min[s.id];
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& p : data.prods) {
      std::size_t total = 0;
      for (const auto& s : p.rhs) total = std::min(kInf, total + sym_min(s));
      if (total < nt_min[p.lhs]) nt_min[p.lhs] = total, changed = true;
    }
  }

  // Leftmost expansion of sentential forms; `rest` holds pending symbols in
  // reverse so the next symbol is at the back.
  struct Form {
    Tokens emitted;
    std::vector<Data::Sym> rest;
    std::size_t rest_min;
    std::size_t unit_chain;
  };
  std::set<Tokens> sentences;
  if (max_len == 0 || nt_min[data.start_id] > max_len) return {};
  std::deque<Form> frontier;
  frontier.push_back({{}, {{Kind::kNonterminal, data.start_id}}, nt_min[data.start_id], 0});
  const std::size_t n_nt = data.nt_names.size();

  while (!frontier.empty()) {
    if (frontier.size() > frontier_cap)
      throw DataError("enumerate_language: frontier exceeded cap of " + std::to_string(frontier_cap));
    Form f = std::move(frontier.front());
    frontier.pop_front();
    if (f.rest.empty()) {
      sentences.insert(std::move(f.emitted));
      continue;
    }
    const auto sym = f.rest.back();
    f.rest.pop_back();
    const auto base_min = f.rest_min - sym_min(sym);
    if (sym.kind == Kind::kTerminal) {
      f.emitted.push_back(data.terminal_names[sym.id]);
      f.rest_min = base_min;
      f.unit_chain = 0;
      frontier.push_back(std::move(f));
      continue;
    }
    if (sym.kind == Kind::kSlot) {
      for (const auto& v : pools.values(data.slot_names[sym.id])) {
        if (f.emitted.size() + v.size() + base_min > max_len) continue;
        Form next{f.emitted, f.rest, base_min, 0};
        next.emitted.insert(next.emitted.end(), v.begin(), v.end());
        frontier.push_back(std::move(next));
      }
      continue;
    }
    for (auto idx : g.productions_for(data.nt_names[sym.id])) {
      const auto& rhs = data.prods[idx].rhs;
      std::size_t add = 0;
      for (const auto& s : rhs) add = std::min(kInf, add + sym_min(s));
      if (f.emitted.size() + base_min + add > max_len) continue;
      const bool unit = rhs.size() == 1 && rhs[0].kind == Kind::kNonterminal;
      // A unit chain longer than the nonterminal count repeats a nonterminal.
      if (unit && f.unit_chain + 1 > n_nt) continue;
      Form next{f.emitted, f.rest, base_min + add, unit ? f.unit_chain + 1 : 0};
      next.rest.insert(next.rest.end(), rhs.rbegin(), rhs.rend());
      frontier.push_back(std::move(next));
    }
  }
  return {sentences.begin(), sentences.end()};
}

}  // namespace privaug
