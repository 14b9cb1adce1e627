// Synchronous context-free grammars relating logical forms and canonical
// utterances, and the derivation trees that render to both.
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "privaug/common.hpp"
#include "privaug/pools.hpp"

namespace privaug {

struct Symbol {
  enum class Kind { kNonterminal, kTerminal, kSlot };

  Kind kind = Kind::kTerminal;
  std::string name;  // nonterminal name, terminal token or slot category
  std::optional<std::string> slot_category;

  static Symbol nonterminal(std::string name);
  static Symbol terminal(std::string token);
  static Symbol slot(std::string category);

  bool is_nonterminal() const { return kind == Kind::kNonterminal; }
  bool is_terminal() const { return kind == Kind::kTerminal; }
  bool is_slot() const { return kind == Kind::kSlot; }

  friend bool operator==(const Symbol&, const Symbol&) = default;
};

/// One template piece: literal text or a hole referring to the k-th
/// nonterminal/slot occurrence of the canonical right-hand side.
struct TemplatePiece {
  std::string literal;
  std::optional<std::size_t> hole;
};

struct SyncProduction {
  std::string lhs;
  std::vector<Symbol> canonical_rhs;
  std::string logical_template;
  /// alignment[k] = hole number bound to the k-th nonterminal/slot occurrence.
  /// Holes are numbered by occurrence, so this is the identity permutation;
  /// kept explicit so callers never rely on that convention.
  std::vector<std::size_t> alignment;
  std::vector<TemplatePiece> pieces;
  std::size_t index = 0;  // position in the grammar file

  std::size_t arity() const { return alignment.size(); }
};

using ProductionRef = std::shared_ptr<const SyncProduction>;

class Grammar {
 public:
  struct Data;

  /// Validates every grammar invariant; throws GrammarError.
  static Grammar create(std::string start, std::vector<SyncProduction> productions);

  const std::string& start() const;
  const std::vector<ProductionRef>& productions() const;
  const std::set<std::string>& slot_categories() const;
  /// Production indices for a nonterminal in file order (empty if unknown).
  const std::vector<std::size_t>& productions_for(const std::string& nonterminal) const;
  std::set<std::string> terminals() const;
  /// Stable content hash of the normalized grammar.
  std::string fingerprint() const;
  /// Normalized grammar-file text; load_grammar(to_text()) reproduces the grammar.
  std::string to_text() const;

  // Dense symbol ids used by the recognizer; -1 when absent.
  int terminal_id(std::string_view token) const;
  const std::string& terminal_token(int id) const;
  int slot_id(std::string_view category) const;
  const std::string& slot_name(int id) const;
  std::size_t num_slots() const;

  const std::shared_ptr<const Data>& data() const { return data_; }

 private:
  explicit Grammar(std::shared_ptr<const Data> data) : data_(std::move(data)) {}
  std::shared_ptr<const Data> data_;
};

Grammar load_grammar(std::string_view text);
Grammar load_grammar_file(const std::filesystem::path& path);

struct SlotFill {
  std::string category;
  Tokens value;

  friend bool operator==(const SlotFill&, const SlotFill&) = default;
};

struct DerivationChild;

struct Derivation {
  ProductionRef production;
  std::vector<DerivationChild> children;
};

struct DerivationChild {
  std::variant<Derivation, SlotFill> node;

  bool is_slot() const { return std::holds_alternative<SlotFill>(node); }
  const Derivation& derivation() const { return std::get<Derivation>(node); }
  const SlotFill& slot() const { return std::get<SlotFill>(node); }
  Derivation& derivation() { return std::get<Derivation>(node); }
  SlotFill& slot() { return std::get<SlotFill>(node); }
};

/// Checks arity and slot-category consistency recursively.
bool well_formed(const Derivation& d);
/// Same production tree (productions compared by grammar position) and slot
/// categories; slot values may differ.
bool same_shape(const Derivation& a, const Derivation& b);

Tokens render_canonical(const Derivation& d);
std::string render_logical(const Derivation& d);

/// Throws NoParseError. Ambiguity resolves to the earliest-listed production
/// at each node and the longest slot span at each slot.
Derivation parse_canonical(const Grammar& g, std::span<const Token> tokens);

/// Uniform over productions that can finish within the remaining depth; slots
/// are drawn uniformly from `pools`. Throws DepthExhaustedError.
Derivation sample_derivation(const Grammar& g, Rng& rng, int max_depth,
                             const ReplacementPools& pools);

struct PrefixAllowed {
  std::set<Token> tokens;
  bool can_end = false;
};

/// Next tokens that keep `prefix` a prefix of a sentence of the grammar whose
/// slots are expanded by pool values.
PrefixAllowed prefix_allowed(const Grammar& g, const ReplacementPools& pools,
                             std::span<const Token> prefix);

/// All sentences of length <= max_len (slots expanded by pool values), sorted
/// and unique. Throws DataError if the expansion frontier exceeds the cap.
std::vector<Tokens> enumerate_language(const Grammar& g, std::size_t max_len,
                                       const ReplacementPools& pools,
                                       std::size_t frontier_cap = 1'000'000);

}  // namespace privaug
