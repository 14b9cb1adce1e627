// Incremental Earley recognition over grammar symbols, and a token-level
// prefix automaton that expands slots into pool values.
#pragma once

#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "privaug/common.hpp"
#include "privaug/pools.hpp"
#include "privaug/scfg.hpp"

namespace privaug {

/// Earley chart after scanning a sequence of terminals and whole slots.
/// Copies share the chart prefix, so hypotheses can fork cheaply.
class EarleyState {
 public:
  explicit EarleyState(Grammar g);

  bool accepts() const;
  bool dead() const;
  /// Terminal ids that may be scanned next (ascending).
  std::vector<int> next_terminals() const;
  /// Slot category ids that may be scanned next (ascending).
  std::vector<int> next_slots() const;

  std::optional<EarleyState> scan_terminal(int terminal_id) const;
  std::optional<EarleyState> scan_slot(int slot_id) const;

  /// Number of scanned symbols.
  std::size_t length() const { return chart_.size() - 1; }
  const Grammar& grammar() const { return grammar_; }

  struct Set;

 private:
  EarleyState(Grammar g, std::vector<std::shared_ptr<const Set>> chart)
      : grammar_(std::move(g)), chart_(std::move(chart)) {}
  std::optional<EarleyState> scan(int kind, int id) const;

  Grammar grammar_;
  std::vector<std::shared_ptr<const Set>> chart_;
};

/// Slot values per slot id of a grammar, taken from replacement pools.
class SlotLexicon {
 public:
  SlotLexicon(const Grammar& g, const ReplacementPools& pools);
  /// Empty when the category has no pool.
  const std::vector<Tokens>& values(int slot_id) const { return values_.at(slot_id); }

 private:
  std::vector<std::vector<Tokens>> values_;
};

/// Set of parser configurations reachable by a token prefix. A token may be a
/// grammar terminal or part of a pool value filling a slot; an in-slot
/// configuration tracks the partial value until it commits.
class PrefixAutomaton {
 public:
  PrefixAutomaton(const Grammar& g, std::shared_ptr<const SlotLexicon> lexicon);

  std::set<Token> allowed() const;
  bool can_end() const;
  bool dead() const { return configs_.empty(); }
  PrefixAutomaton advance(const Token& token) const;

 private:
  struct Config {
    EarleyState state;
    int slot = -1;  // in-slot category id, or -1
    Tokens partial;
    std::vector<int> history;  // scanned symbols; slots encoded as -(id + 1)
  };
  PrefixAutomaton(Grammar g, std::shared_ptr<const SlotLexicon> lexicon, std::vector<Config> configs)
      : grammar_(std::move(g)), lexicon_(std::move(lexicon)), configs_(std::move(configs)) {}
  void add_normalized(std::vector<Config>& out, Config cfg) const;

  Grammar grammar_;
  std::shared_ptr<const SlotLexicon> lexicon_;
  std::vector<Config> configs_;
};

}  // namespace privaug
