// Chart recognition of canonical utterances followed by a preference-ordered
// top-down extraction of one derivation.

#include <set>

#include "grammar_data.hpp"

namespace privaug {
namespace {

using Data = Grammar::Data;
using Kind = Symbol::Kind;

class CanonicalChart {
 public:
  CanonicalChart(const Grammar& g, std::span<const Token> tokens)
      : g_(g), data_(*g.data()), tokens_(tokens), n_(tokens.size()) {
    tok_ids_.reserve(n_);
    quotes_before_.assign(n_ + 1, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      tok_ids_.push_back(g.terminal_id(tokens[i]));
      quotes_before_[i + 1] = quotes_before_[i] + (tokens[i] == kQuote ? 1 : 0);
    }
    derives_.assign(data_.nt_names.size() * (n_ + 1) * (n_ + 1), 0);
    fill();
  }

  bool derives(int nt, std::size_t i, std::size_t j) const { return derives_[index(nt, i, j)]; }

  Derivation extract() {
    if (!derives(data_.start_id, 0, n_)) throw NoParseError("no parse for: " + join(tokens_));
    std::set<std::tuple<int, std::size_t, std::size_t>> visiting;
    auto d = build(data_.start_id, 0, n_, visiting);
    if (!d) throw NoParseError("no parse for: " + join(tokens_));
    return std::move(*d);
  }

 private:
  std::size_t index(int nt, std::size_t i, std::size_t j) const {
    return (static_cast<std::size_t>(nt) * (n_ + 1) + i) * (n_ + 1) + j;
  }

  // Slot values are non-empty and never contain a quote token.
  bool slot_ok(std::size_t i, std::size_t j) const { return j > i && quotes_before_[j] == quotes_before_[i]; }

  // Whether rhs[k..] can cover exactly tokens [pos, j).
  bool covers(const Data::Prod& p, std::size_t k, std::size_t pos, std::size_t j) const {
    std::vector<char> cur(n_ + 1, 0), next(n_ + 1, 0);
    cur[pos] = 1;
    for (std::size_t s = k; s < p.rhs.size(); ++s) {
      std::fill(next.begin(), next.end(), 0);
      const auto& sym = p.rhs[s];
      const std::size_t remaining = p.rhs.size() - s - 1;
      if (j < remaining) return false;
      const std::size_t hi = j - remaining;
      bool any = false;
      for (std::size_t a = 0; a <= n_; ++a) {
        if (!cur[a]) continue;
        if (sym.kind == Kind::kTerminal) {
          if (a < hi && tok_ids_[a] == sym.id) next[a + 1] = any = true;
          continue;
        }
        for (std::size_t b = a + 1; b <= hi; ++b) {
          bool ok = sym.kind == Kind::kSlot ? slot_ok(a, b) : derives(sym.id, a, b);
          if (ok) next[b] = any = true;
        }
      }
      if (!any) return false;
      std::swap(cur, next);
    }
    return cur[j];
  }

  void fill() {
    for (std::size_t len = 1; len <= n_; ++len) {
      for (std::size_t i = 0; i + len <= n_; ++i) {
        const std::size_t j = i + len;
        // Unit productions may depend on the same span; iterate to a fixpoint.
        for (bool changed = true; changed;) {
          changed = false;
          for (const auto& p : data_.prods) {
            auto& cell = derives_[index(p.lhs, i, j)];
            if (!cell && covers(p, 0, i, j)) cell = changed = true;
          }
        }
      }
    }
  }

  bool assign(const Data::Prod& p, const ProductionRef& ref, std::size_t k, std::size_t pos, std::size_t j,
              std::vector<DerivationChild>& children,
              std::set<std::tuple<int, std::size_t, std::size_t>>& visiting) {
    if (k == p.rhs.size()) return pos == j;
    const auto& sym = p.rhs[k];
    if (sym.kind == Kind::kTerminal) {
      return pos < j && tok_ids_[pos] == sym.id && assign(p, ref, k + 1, pos + 1, j, children, visiting);
    }
    const std::size_t remaining = p.rhs.size() - k - 1;
    if (j < pos + 1 + remaining) return false;
    // Longest span first: slot values are matched greedily.
    for (std::size_t b = j - remaining; b > pos; --b) {
      if (sym.kind == Kind::kSlot) {
        if (!slot_ok(pos, b) || !covers(p, k + 1, b, j)) continue;
        children.push_back({SlotFill{data_.slot_names[sym.id], Tokens(tokens_.begin() + pos, tokens_.begin() + b)}});
      } else {
        if (!derives(sym.id, pos, b) || !covers(p, k + 1, b, j)) continue;
        auto sub = build(sym.id, pos, b, visiting);
        if (!sub) continue;
        children.push_back({std::move(*sub)});
      }
      if (assign(p, ref, k + 1, b, j, children, visiting)) return true;
      children.pop_back();
    }
    return false;
  }

  std::optional<Derivation> build(int nt, std::size_t i, std::size_t j,
                                  std::set<std::tuple<int, std::size_t, std::size_t>>& visiting) {
    auto key = std::make_tuple(nt, i, j);
    if (!visiting.insert(key).second) return std::nullopt;
    std::optional<Derivation> result;
    for (auto idx : g_.productions_for(data_.nt_names[nt])) {
      const auto& p = data_.prods[idx];
      if (!covers(p, 0, i, j)) continue;
      std::vector<DerivationChild> children;
      if (assign(p, data_.productions[idx], 0, i, j, children, visiting)) {
        result = Derivation{data_.productions[idx], std::move(children)};
        break;
      }
    }
    visiting.erase(key);
    return result;
  }

  const Grammar& g_;
  const Data& data_;
  std::span<const Token> tokens_;
  std::size_t n_;
  std::vector<int> tok_ids_;
  std::vector<int> quotes_before_;
  std::vector<char> derives_;
};

}  // namespace

Derivation parse_canonical(const Grammar& g, std::span<const Token> tokens) {
  CanonicalChart chart(g, tokens);
  return chart.extract();
}

}  // namespace privaug
