#include <cmath>
#include <set>

#include "doctest.h"
#include "privaug/decoder.hpp"
#include "test_support.hpp"

using namespace privaug;
using namespace privaug::testing;

namespace {

// All mass on a token no grammar contains.
class BananaLM : public TokenLM {
 public:
  TokenDistribution next_token_logprobs(std::span<const Token>) const override {
    TokenDistribution d;
    d.entries["banana"] = 0.0;
    return d;
  }
};

DecodeParams sample_params(int max_len = 32, double temperature = 1.0) {
  DecodeParams p;
  p.max_len = max_len;
  p.temperature = temperature;
  p.mode = DecodeParams::Mode::kSample;
  return p;
}

DecodeParams beam_params(int width, int max_len = 32) {
  DecodeParams p;
  p.max_len = max_len;
  p.beam_width = width;
  p.mode = DecodeParams::Mode::kBeam;
  return p;
}

// Independent recomputation of a sequence's masked, renormalized log-prob
// from the prefix oracle and the LM's full distribution.
double recompute_logprob(const TokenLM& lm, const Grammar& g, const ReplacementPools& pools, const Tokens& context,
                         const Tokens& tokens) {
  double total = 0.0;
  for (std::size_t k = 0; k <= tokens.size(); ++k) {
    Tokens prefix(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(k));
    auto allowed = prefix_allowed(g, pools, prefix);
    std::set<Token> cands = allowed.tokens;
    if (allowed.can_end) cands.insert(std::string(kEos));
    Tokens lm_prefix = context;
    lm_prefix.insert(lm_prefix.end(), prefix.begin(), prefix.end());
    auto dist = lm.next_token_logprobs(lm_prefix);
    auto lp = [&](const Token& t) {
      auto it = dist.entries.find(t);
      return it != dist.entries.end() ? it->second : dist.logprob(std::string(kUnk));
    };
    double z = 0.0;
    for (const auto& c : cands) z += std::exp(lp(c));
    const Token chosen = k == tokens.size() ? std::string(kEos) : tokens[k];
    REQUIRE(cands.count(chosen));
    total += lp(chosen) - std::log(z);
  }
  return total;
}

}  // namespace

TEST_CASE("constrained_sample stays in the language") {
  auto g = toycal();
  auto pools = small_pools();
  UniformLM lm({});
  auto language = enumerate_language(g, 32, pools);
  std::set<Tokens> lang(language.begin(), language.end());
  Rng rng(3);
  auto s = constrained_sample(lm, g, pools, rng, sample_params());
  CHECK(lang.count(s.tokens));
  CHECK(s.logprob <= 0.0);
  int failures = 0;
  for (int i = 0; i < 1000; ++i) {
    auto t = constrained_sample(lm, g, pools, rng, sample_params());
    try {
      parse_canonical(g, t.tokens);
    } catch (const NoParseError&) {
      ++failures;
    }
    failures += lang.count(t.tokens) ? 0 : 1;
  }
  CHECK(failures == 0);

  BananaLM banana;
  for (int i = 0; i < 20; ++i) CHECK(lang.count(constrained_sample(banana, g, pools, rng, sample_params()).tokens));
}

TEST_CASE("constrained_sample soundness across random grammars") {
  Rng rng(12);
  auto pools = random_grammar_pools();
  UniformLM lm({});
  int runs = 0;
  for (int gi = 0; gi < 10; ++gi) {
    auto g = load_grammar(random_grammar_text(rng));
    auto trained = train_ngram({{"a", "b"}, {"c", "d", "a"}, {"u", "v"}}, 2, 0.5);
    for (int i = 0; i < 60; ++i, ++runs) {
      const TokenLM& model = i % 2 ? static_cast<const TokenLM&>(lm) : trained;
      auto s = constrained_sample(model, g, pools, rng, sample_params(64, 0.5 + uniform_unit(rng)));
      REQUIRE_NOTHROW(parse_canonical(g, s.tokens));
      CHECK(std::abs(s.logprob - recompute_logprob(model, g, pools, {}, s.tokens)) < 1e-9);
    }
  }
  CHECK(runs >= 600);
}

TEST_CASE("constrained_sample with a prompt context") {
  auto g = toycal();
  auto pools = small_pools();
  auto lm = train_ngram({tokenize("create event with kai"), tokenize("hello")}, 3, 0.1);
  auto context = prompt_tokens("hello\ncreate event with dana\n");
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    auto s = constrained_sample(lm, g, pools, rng, sample_params(), context);
    CHECK_NOTHROW(parse_canonical(g, s.tokens));
    CHECK(std::abs(s.logprob - recompute_logprob(lm, g, pools, context, s.tokens)) < 1e-9);
  }
}

TEST_CASE("constrained_sample errors and greedy mode") {
  auto long_only = load_grammar("start R\nR -> a b c => (R)\n");
  UniformLM lm({});
  Rng rng(1);
  try {
    constrained_sample(lm, long_only, {}, rng, sample_params(2));
    FAIL("expected error");
  } catch (const DecodeError& e) {
    CHECK(e.kind() == DecodeError::Kind::kLengthExceeded);
  }
  auto slot_only = load_grammar("start R\nR -> <slot:x> => (R {0})\n");
  try {
    constrained_sample(lm, slot_only, {}, rng, sample_params());
    FAIL("expected error");
  } catch (const DecodeError& e) {
    CHECK(e.kind() == DecodeError::Kind::kDeadEnd);
  }
  CHECK_THROWS_AS(constrained_sample(lm, long_only, {}, rng, beam_params(2)), DataError);

  // Greedy decoding with uniform scores picks the smallest token each step:
  // the end marker "</s>" sorts before letters, so "a" must be forced.
  auto g = load_grammar("start R\nR -> b => (B)\nR -> a c => (AC)\n");
  auto greedy = constrained_sample(lm, g, {}, rng, sample_params(8, 0.0));
  CHECK(greedy.tokens == Tokens{"a", "c"});
}

TEST_CASE("constrained_beam completeness on ToyCal") {
  auto g = toycal();
  auto pools = singleton_pools();
  UniformLM lm({});
  auto language = enumerate_language(g, 12, pools);
  auto out = constrained_beam(lm, g, pools, beam_params(static_cast<int>(language.size()), 12));
  std::set<Tokens> got;
  for (const auto& s : out) got.insert(s.tokens);
  CHECK(got == std::set<Tokens>(language.begin(), language.end()));
  CHECK(out.size() == language.size());
  for (std::size_t i = 1; i < out.size(); ++i) {
    CHECK(out[i - 1].logprob >= out[i].logprob);
    if (out[i - 1].logprob == out[i].logprob) CHECK(out[i - 1].tokens < out[i].tokens);
  }
  for (const auto& s : out) CHECK(std::abs(s.logprob - recompute_logprob(lm, g, pools, {}, s.tokens)) < 1e-9);
}

TEST_CASE("constrained_beam greedy and ties") {
  auto g = toycal();
  auto pools = small_pools();
  auto lm = train_ngram({tokenize("find event called \" team sync \""), tokenize("hello")}, 3, 0.01);
  auto one = constrained_beam(lm, g, pools, beam_params(1));
  REQUIRE(one.size() == 1);
  Rng rng(0);
  auto greedy = constrained_sample(lm, g, pools, rng, sample_params(32, 0.0));
  CHECK(one[0].tokens == greedy.tokens);
  CHECK(one[0].logprob == doctest::Approx(greedy.logprob));
  CHECK_NOTHROW(parse_canonical(g, one[0].tokens));

  // Two one-token sentences with equal mass: the smaller comes first.
  auto tie = load_grammar("start R\nR -> zeta => (Z)\nR -> alpha => (A)\n");
  UniformLM uniform({});
  auto both = constrained_beam(uniform, tie, {}, beam_params(2));
  REQUIRE(both.size() == 2);
  CHECK(both[0].logprob == both[1].logprob);
  CHECK(both[0].tokens == Tokens{"alpha"});

  auto long_only = load_grammar("start R\nR -> a b c => (R)\n");
  try {
    constrained_beam(uniform, long_only, {}, beam_params(3, 2));
    FAIL("expected error");
  } catch (const DecodeError& e) {
    CHECK(e.kind() == DecodeError::Kind::kEmptyResult);
  }
}

TEST_CASE("build_plan_prompt") {
  std::vector<Tokens> seed{tokenize("hello"), tokenize("create event with kai"), tokenize("find event called \" x \"")};
  Rng a(1), b(1);
  auto p = build_plan_prompt(seed, a, 3);
  CHECK(p == build_plan_prompt(seed, b, 3));
  CHECK(p.back() == '\n');
  std::set<std::string> lines;
  std::istringstream in(p);
  for (std::string line; std::getline(in, line);) lines.insert(line);
  CHECK(lines == std::set<std::string>{"hello", "create event with kai", "find event called \" x \""});
  auto one = build_plan_prompt(seed, a, 1);
  CHECK(std::count(one.begin(), one.end(), '\n') == 1);
  CHECK_THROWS_AS(build_plan_prompt({}, a, 1), DataError);
  CHECK_THROWS_AS(build_plan_prompt(seed, a, 4), DataError);
  CHECK(prompt_tokens("a b\nc\n") == Tokens{"a", "b", "<s>", "c", "<s>"});
}
