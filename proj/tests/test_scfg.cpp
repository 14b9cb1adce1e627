#include <map>

#include "doctest.h"
#include "privaug/recognizer.hpp"
#include "privaug/scfg.hpp"
#include "test_support.hpp"

using namespace privaug;
using namespace privaug::testing;

namespace {

Derivation create_event(const Grammar& g, const std::string& name) {
  return Derivation{g.productions()[0], {{SlotFill{"name", tokenize(name)}}}};
}

Derivation find_event(const Grammar& g, std::size_t prod, const std::string& title) {
  return Derivation{g.productions()[prod], {{SlotFill{"title", tokenize(title)}}}};
}

}  // namespace

TEST_CASE("load_grammar reads the ToyCal fixture") {
  auto g = load_grammar_file(source_dir() / "data/toycal/toycal.grammar");
  CHECK(g.productions().size() == 6);
  CHECK(g.start() == "ROOT");
  CHECK(g.slot_categories() == std::set<std::string>{"name", "title"});
  CHECK(g.productions_for("ROOT").size() == 5);
  CHECK(g.productions()[1]->canonical_rhs[3] == Symbol::terminal("\""));
  CHECK(g.fingerprint() == toycal().fingerprint());
  CHECK(load_grammar(g.to_text()).fingerprint() == g.fingerprint());
}

TEST_CASE("load_grammar errors") {
  SUBCASE("undefined nonterminal") {
    try {
      load_grammar("start ROOT\nROOT -> weather at <PLACE> => (Weather {0})\n");
      FAIL("expected error");
    } catch (const GrammarError& e) {
      CHECK(e.kind() == GrammarError::Kind::kUndefinedNonterminal);
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("empty file has no start symbol") {
    try {
      load_grammar("");
      FAIL("expected error");
    } catch (const GrammarError& e) {
      CHECK(e.kind() == GrammarError::Kind::kSyntax);
    }
    CHECK_THROWS_AS(load_grammar("# only a comment\n\n"), GrammarError);
  }
  SUBCASE("alignment arity") {
    try {
      load_grammar("start R\n# c\nR -> hi <slot:name> => (Hi)\n");
      FAIL("expected error");
    } catch (const GrammarError& e) {
      CHECK(e.kind() == GrammarError::Kind::kAlignmentArity);
      CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(load_grammar("start R\nR -> hi => (Hi {0})\n"), GrammarError);
    CHECK_THROWS_AS(load_grammar("start R\nR -> hi <slot:a> <slot:b> => (Hi {0} {0})\n"), GrammarError);
  }
  SUBCASE("missing separator and bad start") {
    CHECK_THROWS_AS(load_grammar("start R\nR -> hi (Hi)\n"), GrammarError);
    CHECK_THROWS_AS(load_grammar("R -> hi => (Hi)\n"), GrammarError);
    CHECK_THROWS_AS(load_grammar("start R\nQ -> hi => (Hi)\n"), GrammarError);
  }
}

TEST_CASE("comments and hash tokens") {
  auto g = load_grammar("start R  # trailing comment\nR -> return #1 => (Ref 1)\n");
  CHECK(render_canonical(parse_canonical(g, tokenize("return #1"))) == Tokens{"return", "#1"});
}

TEST_CASE("render canonical and logical") {
  auto g = toycal();
  auto d = create_event(g, "dana");
  CHECK(well_formed(d));
  CHECK(render_canonical(d) == Tokens{"create", "event", "with", "dana"});
  CHECK(render_logical(d) == "(CreateEvent :attendee \"dana\")");
  CHECK(render_logical(d) == render_logical(d));

  auto leaf = load_grammar("start R\nR -> hello => (Noop)\n");
  Derivation hello{leaf.productions()[0], {}};
  CHECK(render_canonical(hello) == Tokens{"hello"});
  CHECK(render_logical(hello) == "(Noop)");

  // Depth-3 nesting renders the in-order leaf traversal; holes may reorder.
  auto nested = load_grammar(
      "start A\nA -> x <B> y => (A {0})\nB -> <C> z => (B {0})\nC -> w <slot:v> => (C {0})\n");
  Derivation c{nested.productions()[2], {{SlotFill{"v", {"q"}}}}};
  Derivation b{nested.productions()[1], {{c}}};
  Derivation a{nested.productions()[0], {{b}}};
  CHECK(render_canonical(a) == Tokens{"x", "w", "q", "z", "y"});
  CHECK(render_logical(a) == "(A (B (C \"q\")))");

  auto swapped = load_grammar("start R\nR -> from <slot:a> to <slot:b> => (Trip :to {1} :from {0})\n");
  Derivation trip{swapped.productions()[0], {{SlotFill{"a", {"x"}}}, {SlotFill{"b", {"y"}}}}};
  CHECK(render_logical(trip) == "(Trip :to \"y\" :from \"x\")");
}

TEST_CASE("well_formed rejects arity and category mismatches") {
  auto g = toycal();
  Derivation bad{g.productions()[0], {}};
  CHECK_FALSE(well_formed(bad));
  Derivation wrong_cat{g.productions()[0], {{SlotFill{"title", {"x"}}}}};
  CHECK_FALSE(well_formed(wrong_cat));
}

TEST_CASE("parse_canonical") {
  auto g = toycal();
  auto d = parse_canonical(g, tokenize("create event with dana"));
  CHECK(same_shape(d, create_event(g, "dana")));
  CHECK(d.children[0].slot().value == Tokens{"dana"});
  CHECK(render_logical(d) == "(CreateEvent :attendee \"dana\")");

  CHECK_THROWS_AS(parse_canonical(g, tokenize("create banana")), NoParseError);
  CHECK_THROWS_AS(parse_canonical(g, Tokens{}), NoParseError);

  auto nested = parse_canonical(g, tokenize("delete find event called \"bowling fundraiser\""));
  CHECK(render_logical(nested) == "(Delete (FindEvent :title \"bowling fundraiser\"))");
  // Slot values never swallow the closing quote.
  CHECK_THROWS_AS(parse_canonical(g, tokenize("find event called \" a \" b")), NoParseError);
}

TEST_CASE("parse_canonical resolves ambiguity by production order and greedy slots") {
  auto g = load_grammar(
      "start R\n"
      "R -> go <slot:a> => (First {0})\n"
      "R -> go <X> => (Second {0})\n"
      "X -> home => (Home)\n"
      "R -> see <slot:a> <slot:b> => (Two {0} {1})\n");
  CHECK(render_logical(parse_canonical(g, tokenize("go home"))) == "(First \"home\")");
  CHECK(render_logical(parse_canonical(g, tokenize("see p q r"))) == "(Two \"p q\" \"r\")");

  auto unit = load_grammar("start A\nA -> <B> => (A {0})\nB -> <A> => (B {0})\nB -> b => (b)\n");
  CHECK(render_logical(parse_canonical(unit, Tokens{"b"})) == "(A (b))");
}

TEST_CASE("sample_derivation") {
  auto g = toycal();
  auto pools = small_pools();
  Rng rng(7);
  auto d = sample_derivation(g, rng, 8, pools);
  CHECK(well_formed(d));
  CHECK(render_canonical(parse_canonical(g, render_canonical(d))) == render_canonical(d));

  Rng a(11), b(11);
  for (int i = 0; i < 20; ++i)
    CHECK(render_logical(sample_derivation(g, a, 8, pools)) == render_logical(sample_derivation(g, b, 8, pools)));

  auto loop = load_grammar("start ROOT\nROOT -> <ROOT> => (Loop {0})\n");
  CHECK_THROWS_AS(sample_derivation(loop, rng, 5, pools), DepthExhaustedError);

  // Depth 1 excludes the nested productions.
  for (int i = 0; i < 50; ++i) {
    auto shallow = sample_derivation(g, rng, 1, pools);
    CHECK(shallow.production->index != 2);
    CHECK(shallow.production->index != 3);
  }
}

TEST_CASE("sample_derivation is uniform over top-level productions") {
  // Expected frequency: 1/5 for each of the five ROOT productions.
  auto g = toycal();
  auto pools = small_pools();
  Rng rng(2024);
  std::map<std::size_t, int> counts;
  const int n = 1000;
  for (int i = 0; i < n; ++i) counts[sample_derivation(g, rng, 8, pools).production->index]++;
  CHECK(counts.size() == 5);
  for (const auto& [prod, c] : counts) CHECK(std::abs(c / double(n) - 0.2) <= 0.05);
}

TEST_CASE("prefix_allowed") {
  auto g = toycal();
  auto pools = singleton_pools();
  auto r = prefix_allowed(g, pools, Tokens{"create"});
  CHECK(r.tokens == std::set<Token>{"event"});
  CHECK_FALSE(r.can_end);

  auto full = prefix_allowed(g, pools, tokenize("create event with dana"));
  CHECK(full.can_end);
  CHECK(full.tokens.empty());

  auto dead = prefix_allowed(g, pools, Tokens{"banana"});
  CHECK(dead.tokens.empty());
  CHECK_FALSE(dead.can_end);

  auto start = prefix_allowed(g, pools, Tokens{});
  CHECK(start.tokens == std::set<Token>{"create", "delete", "find", "hello", "start"});

  // In-slot continuation: "kai" may end the slot or continue to "kai lee".
  auto multi = small_pools();
  auto in_slot = prefix_allowed(g, multi, tokenize("create event with kai"));
  CHECK(in_slot.can_end);
  CHECK(in_slot.tokens == std::set<Token>{"lee"});
  auto title = prefix_allowed(g, multi, tokenize("find event called \" team"));
  CHECK(title.tokens == std::set<Token>{"sync", "\""});
}

TEST_CASE("enumerate_language") {
  auto g = toycal();
  auto pools = singleton_pools();
  auto six = enumerate_language(g, 6, pools);
  CHECK(six == std::vector<Tokens>{tokenize("create event with dana"), tokenize("find event called \" picnic \""),
                                   Tokens{"hello"}});
  CHECK(enumerate_language(g, 0, pools).empty());
  auto all = enumerate_language(g, 20, pools);
  CHECK(all.size() == 5);
  for (const auto& s : enumerate_language(g, 20, small_pools())) CHECK_NOTHROW(parse_canonical(g, s));
  CHECK(std::is_sorted(all.begin(), all.end()));

  auto loop = load_grammar("start A\nA -> <B> => (A {0})\nB -> <A> => (B {0})\nB -> b => (b)\nA -> a <A> => (R {0})\n");
  auto lang = enumerate_language(loop, 3, pools);
  CHECK(lang == std::vector<Tokens>{{"a", "a", "b"}, {"a", "b"}, {"b"}});
  CHECK_THROWS_AS(enumerate_language(loop, 20, pools, 2), DataError);
}

TEST_CASE("property: round trip over random grammars") {
  Rng rng(99);
  auto pools = random_grammar_pools();
  for (int gi = 0; gi < 20; ++gi) {
    auto g = load_grammar(random_grammar_text(rng));
    for (int i = 0; i < 50; ++i) {
      auto d = sample_derivation(g, rng, 6, pools);
      auto tokens = render_canonical(d);
      auto back = parse_canonical(g, tokens);
      REQUIRE(render_canonical(back) == tokens);
      CHECK(well_formed(back));
    }
  }
}

namespace {

// Brute-force oracle: continuations of `prefix` among enumerated sentences.
PrefixAllowed oracle_allowed(const std::vector<Tokens>& language, const Tokens& prefix) {
  PrefixAllowed out;
  for (const auto& s : language) {
    if (s.size() < prefix.size() || !std::equal(prefix.begin(), prefix.end(), s.begin())) continue;
    if (s.size() == prefix.size()) out.can_end = true;
    else out.tokens.insert(s[prefix.size()]);
  }
  return out;
}

void check_prefix_oracle(const Grammar& g, const ReplacementPools& pools, std::size_t max_prefix) {
  auto language = enumerate_language(g, 20, pools);
  std::set<Token> alphabet;
  for (const auto& s : language) alphabet.insert(s.begin(), s.end());
  alphabet.insert("banana");
  // Every live prefix up to max_prefix, plus each one-token extension (live or dead).
  std::set<Tokens> prefixes{Tokens{}};
  for (const auto& s : language)
    for (std::size_t k = 1; k <= std::min(max_prefix, s.size()); ++k) prefixes.insert(Tokens(s.begin(), s.begin() + k));
  std::set<Tokens> checked;
  for (const auto& p : prefixes) {
    if (p.size() >= max_prefix) continue;
    for (const auto& t : alphabet) {
      auto q = p;
      q.push_back(t);
      checked.insert(q);
    }
  }
  checked.insert(prefixes.begin(), prefixes.end());
  for (const auto& p : checked) {
    auto got = prefix_allowed(g, pools, p);
    auto want = oracle_allowed(language, p);
    INFO("prefix: " << join(p));
    REQUIRE(got.tokens == want.tokens);
    REQUIRE(got.can_end == want.can_end);
  }
}

}  // namespace

TEST_CASE("property: prefix oracle matches enumeration on ToyCal") {
  check_prefix_oracle(toycal(), singleton_pools(), 6);
  check_prefix_oracle(toycal(), small_pools(), 6);
}

TEST_CASE("property: prefix oracle matches enumeration on random grammars") {
  Rng rng(5);
  int checked = 0;
  for (int gi = 0; gi < 10; ++gi) {
    auto g = load_grammar(random_grammar_text(rng));
    auto lang = enumerate_language(g, 20, random_grammar_pools(), 2'000'000);
    if (lang.size() > 3000) continue;  // keep the brute-force check quick
    check_prefix_oracle(g, random_grammar_pools(), 6);
    ++checked;
  }
  CHECK(checked >= 5);
}

TEST_CASE("EarleyState handles left recursion") {
  auto g = load_grammar("start L\nL -> <L> a => (More {0})\nL -> b => (B)\n");
  EarleyState st(g);
  auto s1 = st.scan_terminal(g.terminal_id("b"));
  REQUIRE(s1);
  CHECK(s1->accepts());
  auto s2 = s1->scan_terminal(g.terminal_id("a"));
  REQUIRE(s2);
  CHECK(s2->accepts());
  CHECK_FALSE(s2->scan_terminal(g.terminal_id("b")));
}
