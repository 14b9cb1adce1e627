// Private compiled representation behind privaug::Grammar.
#pragma once

#include <climits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "privaug/scfg.hpp"

namespace privaug {

struct Grammar::Data {
  struct Sym {
    Symbol::Kind kind;
    int id;  // nonterminal, terminal or slot id depending on kind
  };
  struct Prod {
    int lhs;
    std::vector<Sym> rhs;
  };

  std::string start;
  std::vector<ProductionRef> productions;
  std::set<std::string> slot_categories;
  std::map<std::string, std::vector<std::size_t>> by_lhs;

  std::map<std::string, int> nt_ids;
  std::vector<std::string> nt_names;
  std::unordered_map<std::string, int> terminal_ids;
  std::vector<std::string> terminal_names;
  std::map<std::string, int> slot_ids;
  std::vector<std::string> slot_names;

  std::vector<Prod> prods;  // parallel to `productions`
  std::vector<char> productive;  // per production
  std::vector<std::vector<int>> recognizer_prods;  // per nonterminal, productive only, file order
  std::vector<int> min_depth;  // per nonterminal; INT_MAX when no finite derivation
  int start_id = 0;
  std::string fingerprint;

  static constexpr int kInfiniteDepth = INT_MAX;

  /// Minimum depth of a derivation rooted at production p.
  int production_min_depth(std::size_t p) const {
    int deepest = 0;
    for (const auto& s : prods[p].rhs) {
      if (s.kind != Symbol::Kind::kNonterminal) continue;
      if (min_depth[s.id] == kInfiniteDepth) return kInfiniteDepth;
      deepest = std::max(deepest, min_depth[s.id]);
    }
    return deepest + 1;
  }
};

}  // namespace privaug
