// Fixtures and generators shared by the unit and acceptance suites.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "privaug/common.hpp"
#include "privaug/pools.hpp"
#include "privaug/scfg.hpp"

namespace privaug::testing {

inline std::filesystem::path source_dir() { return PRIVAUG_SOURCE_DIR; }

inline const char* kToyCalText = R"(start ROOT
ROOT -> create event with <slot:name> => (CreateEvent :attendee {0})
ROOT -> find event called " <slot:title> " => (FindEvent :title {0})
ROOT -> delete <ROOT_FIND> => (Delete {0})
ROOT -> start time of <ROOT_FIND> => (StartTime {0})
ROOT_FIND -> find event called " <slot:title> " => (FindEvent :title {0})
ROOT -> hello => (Greet)
)";

inline Grammar toycal() { return load_grammar(kToyCalText); }

inline ReplacementPools make_pools(const std::vector<std::pair<std::string, std::vector<std::string>>>& spec) {
  ReplacementPools pools;
  for (const auto& [cat, values] : spec) {
    std::vector<Tokens> vals;
    for (const auto& v : values) vals.push_back(tokenize(v));
    pools.add_category(cat, std::move(vals));
  }
  return pools;
}

inline ReplacementPools singleton_pools() { return make_pools({{"name", {"dana"}}, {"title", {"picnic"}}}); }

/// Multi-token and prefix-sharing values exercise in-slot continuation.
inline ReplacementPools small_pools() {
  return make_pools({{"name", {"dana", "kai", "kai lee"}}, {"title", {"picnic", "team sync", "team"}}});
}

/// Random small grammar over terminals a..d with an optional slot category
/// `x`. Every nonterminal has a terminal-only production so the start
/// symbol is productive.
inline std::string random_grammar_text(Rng& rng, bool with_slots = true) {
  const std::vector<std::string> nts = {"S", "A", "B"};
  const std::vector<std::string> terms = {"a", "b", "c", "d"};
  std::string text = "start S\n";
  for (const auto& nt : nts) {
    const std::size_t n_prods = 1 + uniform_index(rng, 3);
    text += nt + " -> " + terms[uniform_index(rng, terms.size())] + " => (" + nt + "0)\n";
    for (std::size_t p = 0; p < n_prods; ++p) {
      const std::size_t len = 1 + uniform_index(rng, 3);
      std::string rhs;
      std::size_t holes = 0;
      std::string tmpl = "(" + nt + "p" + std::to_string(p);
      for (std::size_t k = 0; k < len; ++k) {
        const auto roll = uniform_index(rng, 10);
        if (roll < 3 && nt != "B") {
          // Only reference "later" nonterminals so every form terminates quickly.
          const auto& target = nt == "S" ? nts[1 + uniform_index(rng, 2)] : nts[2];
          rhs += " <" + target + ">";
        } else if (roll < 4 && with_slots) {
          rhs += " <slot:x>";
        } else {
          rhs += " " + terms[uniform_index(rng, terms.size())];
          continue;
        }
        tmpl += " {" + std::to_string(holes++) + "}";
      }
      text += nt + " ->" + rhs + " => " + tmpl + ")\n";
    }
  }
  return text;
}

inline ReplacementPools random_grammar_pools() { return make_pools({{"x", {"u", "v w", "v"}}}); }

/// Values used when generating ToyCal utterances; disjoint from small_pools().
inline ReplacementPools toycal_generator_pools() {
  return make_pools({{"name", {"ada", "bo", "ana maria", "li", "omar", "sven"}},
                     {"title", {"bowling fundraiser", "potluck", "book club", "budget review", "yoga"}}});
}

/// Noiseless natural rendering of a ToyCal derivation. Every production has
/// two phrasings; `variant` picks one.
inline Tokens toycal_natural(const Derivation& d, std::size_t variant) {
  static const std::vector<std::vector<std::string>> templates = {
      {"please create a meeting with {}", "set up an event with {}"},
      {"find the event called {}", "look up my {} event"},
      {"cancel {}", "remove {}"},
      {"when does {} start", "what time is {}"},
      {"the event called {}", "my {} event"},
      {"hi there", "hello assistant"},
  };
  const auto& tmpl = templates[d.production->index][variant % 2];
  Tokens inner;
  const auto& child = d.children.empty() ? std::optional<DerivationChild>{} : d.children[0];
  if (child) inner = child->is_slot() ? child->slot().value : toycal_natural(child->derivation(), variant / 2);
  Tokens out;
  for (const auto& tok : tokenize(tmpl)) {
    if (tok == "{}") out.insert(out.end(), inner.begin(), inner.end());
    else out.push_back(tok);
  }
  return out;
}

struct LabelledPair {
  Tokens natural;
  Tokens canonical;
  Derivation derivation;
};

inline std::vector<LabelledPair> toycal_pairs(Rng& rng, std::size_t n) {
  auto g = toycal();
  auto pools = toycal_generator_pools();
  std::vector<LabelledPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto d = sample_derivation(g, rng, 3, pools);
    out.push_back({toycal_natural(d, uniform_index(rng, 4)), render_canonical(d), d});
  }
  return out;
}

}  // namespace privaug::testing
