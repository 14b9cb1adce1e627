#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "privaug/lm.hpp"
#include "test_support.hpp"

using namespace privaug;
using namespace privaug::testing;

TEST_CASE("train_ngram formula") {
  // |V| = {a, b, <s>, </s>, <unk>} = 5; count(a) = 1, count(a, b) = 1.
  auto m = train_ngram({{"a", "b"}}, 2, 1.0);
  CHECK(m.vocabulary().size() == 5);
  CHECK(std::exp(m.logprob(Tokens{"a"}, "b")) == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
  CHECK_THROWS_AS(train_ngram({}, 2, 1.0), DataError);
  CHECK_THROWS_AS(train_ngram({{"a"}}, 0, 1.0), DataError);
  CHECK_THROWS_AS(train_ngram({{"a"}}, 2, 0.0), DataError);
}

TEST_CASE("unigram limit counts the end marker") {
  // Each sentence contributes one "a" and one "</s>": P(a) = (2 + a) / (4 + 4a).
  auto m = train_ngram({{"a"}, {"a"}}, 1, 1e-6);
  const double pa = std::exp(m.logprob(Tokens{}, "a"));
  const double pe = std::exp(m.logprob(Tokens{}, std::string(kEos)));
  CHECK(pa == doctest::Approx((2 + 1e-6) / (4 + 4e-6)).epsilon(1e-12));
  CHECK(pa + pe == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("distributions normalize") {
  Rng rng(3);
  const Tokens alphabet{"a", "b", "c", "d"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Tokens> corpus;
    for (std::size_t s = 0; s < 1 + uniform_index(rng, 5); ++s) {
      Tokens sent;
      for (std::size_t k = 0; k < uniform_index(rng, 6); ++k) sent.push_back(alphabet[uniform_index(rng, 4)]);
      corpus.push_back(sent);
    }
    auto m = train_ngram(corpus, 1 + static_cast<int>(uniform_index(rng, 3)), 0.1 + uniform_unit(rng));
    for (int q = 0; q < 5; ++q) {
      Tokens prefix;
      for (std::size_t k = 0; k < uniform_index(rng, 4); ++k) prefix.push_back(alphabet[uniform_index(rng, 4)]);
      prefix.push_back(uniform_index(rng, 2) ? "zzz" : "a");
      auto d = m.next_token_logprobs(prefix);
      CHECK(d.normalization_error() < 1e-6);
      for (const auto& [_, lp] : d.entries) {
        CHECK(std::isfinite(lp));
        CHECK(lp <= 0.0);
      }
    }
  }
}

TEST_CASE("backoff, begin context and argmax") {
  auto m = train_ngram({{"a", "b"}, {"a", "b"}}, 3, 1.0);
  // Context (b, a) never occurs; the model backs off to (a).
  auto full = m.next_token_logprobs(Tokens{"b", "a"});
  auto shorter = m.next_token_logprobs(Tokens{"x", "a"});
  CHECK(m.context_count(Tokens{"b", "a"}) == 0);
  for (const auto& [t, lp] : full.entries) CHECK(lp == doctest::Approx(shorter.logprob(t)).epsilon(1e-12));
  CHECK(full.logprob("b") > full.logprob("a"));
  std::string best;
  double best_lp = -1e300;
  for (const auto& [t, lp] : m.next_token_logprobs(Tokens{"a"}).entries)
    if (lp > best_lp) best = t, best_lp = lp;
  CHECK(best == "b");

  // Empty prefix conditions on begin markers; so does a prefix ending in <s>.
  auto start = m.next_token_logprobs(Tokens{});
  CHECK(start.logprob("a") == doctest::Approx(std::log(3.0 / 7.0)));
  auto reset = m.next_token_logprobs(Tokens{"b", "a", std::string(kBos)});
  for (const auto& [t, lp] : start.entries) CHECK(lp == doctest::Approx(reset.logprob(t)).epsilon(1e-12));
  // Unknown tokens score as <unk>.
  CHECK(m.score_candidates(Tokens{}, Tokens{"qqq"})[0] == doctest::Approx(start.logprob(std::string(kUnk))));
}

TEST_CASE("sequence_logprob") {
  // Bigram counts with alpha = 0.5 and |V| = 6:
  //   <s>: a 2, b 1 (3)   a: b 1, c 1 (2)   b: </s> 2 (2)   c: </s> 1 (1)
  // P(a|<s>) P(b|a) P(</s>|b) = (2.5/6)(1.5/5)(2.5/5) = 0.0625
  auto m = train_ngram({{"a", "b"}, {"a", "c"}, {"b"}}, 2, 0.5);
  CHECK(sequence_logprob(m, Tokens{"a", "b"}) == doctest::Approx(-2.772588722239781).epsilon(1e-12));
  CHECK(std::abs(sequence_logprob(m, Tokens{"a", "b"}) - std::log(0.0625)) < 1e-9);
  CHECK(sequence_logprob(m, Tokens{}) == doctest::Approx(std::log(0.5 / 6.0)));
  Tokens seq;
  for (const auto& t : Tokens{"a", "c", "b", "a"}) {
    seq.push_back(t);
    // Appending a token never increases the prefix log-probability (end marker excluded).
    double without_end = sequence_logprob(m, seq) - m.logprob(seq, std::string(kEos));
    Tokens longer = seq;
    longer.push_back("b");
    double longer_without_end = sequence_logprob(m, longer) - m.logprob(longer, std::string(kEos));
    CHECK(longer_without_end <= without_end);
    CHECK(sequence_logprob(m, seq) <= 0.0);
  }
}

TEST_CASE("n-gram determinism and serialization") {
  std::vector<Tokens> corpus{{"x", "y"}, {"y", "z", "x"}, {"x"}};
  auto a = train_ngram(corpus, 3, 0.3, {"extra"});
  auto b = train_ngram(corpus, 3, 0.3, {"extra"});
  CHECK(a.serialize() == b.serialize());
  auto c = NGramModel::deserialize(a.serialize());
  CHECK(c == a);
  CHECK(c.logprob(Tokens{"y"}, "z") == a.logprob(Tokens{"y"}, "z"));
  CHECK(a.in_vocabulary("extra"));
  CHECK_THROWS_AS(NGramModel::deserialize("{\"order\": 2}"), DataError);
  CHECK_THROWS_AS(NGramModel::deserialize("not json"), DataError);
}

TEST_CASE("uniform LM") {
  UniformLM lm({"a", "b"});
  auto d = lm.next_token_logprobs(Tokens{});
  CHECK(d.entries.size() == 5);
  CHECK(d.normalization_error() < 1e-12);
}

namespace {

struct TestServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};
  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight{0};

  template <typename Handler>
  explicit TestServer(Handler handler) {
    server.Post("/v1/complete", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      int now = ++in_flight;
      int prev = max_in_flight.load();
      while (now > prev && !max_in_flight.compare_exchange_weak(prev, now)) {
      }
      handler(req, res);
      --in_flight;
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~TestServer() {
    server.stop();
    thread.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port); }
};

void echo_handler(const httplib::Request& req, httplib::Response& res) {
  auto body = nlohmann::json::parse(req.body);
  nlohmann::json out;
  out["completions"] = nlohmann::json::array();
  for (int i = 0; i < body["n"].get<int>(); ++i)
    out["completions"].push_back(body["prompt"].get<std::string>() + " #" + std::to_string(i) + "\ntrailing");
  res.set_content(out.dump(), "application/json");
}

RemoteConfig fast_config(const std::string& endpoint) {
  RemoteConfig cfg;
  cfg.endpoint = endpoint;
  cfg.backoff = std::chrono::milliseconds(1);
  cfg.timeout = std::chrono::seconds(5);
  return cfg;
}

CompletionRequest greeting_request() {
  CompletionRequest req;
  req.prompt = "Say hello";
  req.max_tokens = 8;
  req.temperature = 0.0;
  req.n_samples = 1;
  return req;
}

}  // namespace

TEST_CASE("remote client: completions, stop and sample count") {
  TestServer server(echo_handler);
  RemoteClient client(fast_config(server.endpoint()));
  CompletionRequest req;
  req.prompt = "hi";
  req.n_samples = 3;
  req.stop = "\n";
  auto out = client.complete(req);
  CHECK(out == std::vector<std::string>{"hi #0", "hi #1", "hi #2"});
  req.stop.reset();
  req.n_samples = 1;
  CHECK(client.complete(req)[0] == "hi #0\ntrailing");
}

TEST_CASE("remote client: errors") {
  SUBCASE("unreachable endpoint fails after retries") {
    RemoteClient client(fast_config("http://127.0.0.1:1"));
    try {
      client.complete(greeting_request());
      FAIL("expected error");
    } catch (const RemoteError& e) {
      CHECK(e.kind() == RemoteError::Kind::kNetwork);
    }
  }
  SUBCASE("server errors are retried three times") {
    TestServer server([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    RemoteClient client(fast_config(server.endpoint()));
    CHECK_THROWS_AS(client.complete(greeting_request()), RemoteError);
    CHECK(server.hits == 4);
  }
  SUBCASE("transient failure then success") {
    std::atomic<int> calls{0};
    TestServer server([&](const httplib::Request& req, httplib::Response& res) {
      if (calls++ < 2) res.status = 500;
      else echo_handler(req, res);
    });
    RemoteClient client(fast_config(server.endpoint()));
    CHECK(client.complete(greeting_request()).size() == 1);
    CHECK(server.hits == 3);
  }
  SUBCASE("authentication") {
    TestServer server([](const httplib::Request& req, httplib::Response& res) {
      res.status = req.get_header_value("Authorization") == "Bearer good" ? 200 : 401;
      if (res.status == 200) res.set_content("{\"completions\": [\"ok\"]}", "application/json");
    });
    auto cfg = fast_config(server.endpoint());
    cfg.api_key = "bad";
    try {
      RemoteClient(cfg).complete(greeting_request());
      FAIL("expected error");
    } catch (const RemoteError& e) {
      CHECK(e.kind() == RemoteError::Kind::kAuthentication);
    }
    CHECK(server.hits == 1);
    cfg.api_key = "good";
    CHECK(RemoteClient(cfg).complete(greeting_request()) == std::vector<std::string>{"ok"});
  }
  SUBCASE("malformed responses") {
    std::string body;
    TestServer server([&](const httplib::Request&, httplib::Response& res) { res.set_content(body, "application/json"); });
    RemoteClient client(fast_config(server.endpoint()));
    for (std::string bad : {"garbage", "{}", "{\"completions\": [1]}", "{\"completions\": [\"a\", \"b\"]}"}) {
      body = bad;
      try {
        client.complete(greeting_request());
        FAIL("expected error");
      } catch (const RemoteError& e) {
        CHECK(e.kind() == RemoteError::Kind::kMalformedResponse);
      }
    }
  }
}

TEST_CASE("remote client: in-flight cap") {
  TestServer server([](const httplib::Request& req, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    echo_handler(req, res);
  });
  auto cfg = fast_config(server.endpoint());
  cfg.max_in_flight = 2;
  RemoteClient client(cfg);
  std::vector<std::thread> threads;
  std::atomic<int> done{0};
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&, i] {
      auto req = greeting_request();
      req.prompt += std::to_string(i);
      if (client.complete(req).size() == 1) ++done;
    });
  for (auto& t : threads) t.join();
  CHECK(done == 8);
  CHECK(server.max_in_flight <= 2);
}

TEST_CASE("record and replay") {
  auto dir = std::filesystem::temp_directory_path() / "privaug_replay_test";
  std::filesystem::remove_all(dir);
  CompletionRequest req;
  req.prompt = "record me";
  req.n_samples = 2;
  req.stop = "\n";
  std::vector<std::string> recorded;
  {
    TestServer server(echo_handler);
    auto cfg = fast_config(server.endpoint());
    cfg.replay_mode = ReplayMode::kRecord;
    cfg.replay_dir = dir;
    recorded = RemoteClient(cfg).complete(req);
  }
  CHECK(std::filesystem::exists(dir / (req.hash() + ".json")));
  auto cfg = fast_config("http://127.0.0.1:1");
  cfg.replay_mode = ReplayMode::kReplay;
  cfg.replay_dir = dir;
  RemoteClient replay(cfg);
  CHECK(replay.complete(req) == recorded);
  CHECK(replay.complete(req) == recorded);
  req.prompt = "never recorded";
  try {
    replay.complete(req);
    FAIL("expected error");
  } catch (const RemoteError& e) {
    CHECK(e.kind() == RemoteError::Kind::kReplayMiss);
  }
}

TEST_CASE("replay fixture: greeting") {
  auto dir = source_dir() / "tests/fixtures/replay/greeting";
  auto cfg = fast_config("http://127.0.0.1:1");
  cfg.replay_mode = ReplayMode::kReplay;
  cfg.replay_dir = dir;
  auto out = RemoteClient(cfg).complete(greeting_request());
  REQUIRE(out.size() == 1);
  CHECK(out[0] == "Hello! Nice to meet you.");
}

TEST_CASE("request hashing is canonical") {
  auto a = greeting_request();
  auto b = greeting_request();
  CHECK(a.hash() == b.hash());
  b.temperature = 0.5;
  CHECK(a.hash() != b.hash());
  CHECK(a.canonical_body() ==
        R"({"prompt":"Say hello","max_tokens":8,"temperature":0.0,"n":1,"stop":null})");
  b.n_samples = 0;
  CHECK_THROWS_AS(b.canonical_body(), DataError);
  CHECK(truncate_at_stop("ab\ncd", "\n") == "ab");
  CHECK(truncate_at_stop("abcd", std::nullopt) == "abcd");
}

namespace {

std::vector<Tokens> sim_background() {
  return {tokenize("please set up a meeting with ada"), tokenize("please arrange a meeting with bo"),
          tokenize("set up a call with ada"),           tokenize("look up the picnic event"),
          tokenize("look for the picnic event"),        tokenize("find the yoga event")};
}

CompletionRequest sim_request(const std::string& target, int n = 4, double temperature = 1.0) {
  CompletionRequest r;
  r.prompt = "C: create event with ada\nN: please set up a meeting with ada\n\n"
             "C: find event called \" yoga \"\nN: look up the yoga event\n\n"
             "C: " + target + "\nN: ";
  r.n_samples = n;
  r.temperature = temperature;
  r.stop = "\n";
  return r;
}

}  // namespace

TEST_CASE("simulator: determinism, count and stop") {
  SimulatorBackend sim(sim_background(), {0.1, 0.3, 7});
  auto req = sim_request("create event with bo", 6);
  auto a = sim.complete(req);
  CHECK(a.size() == 6);
  CHECK(a == sim.complete(req));
  for (const auto& s : a) {
    CHECK(s.find('\n') == std::string::npos);
    CHECK(s.find("C:") == std::string::npos);
    CHECK(!s.empty());
  }
  SimulatorBackend other_seed(sim_background(), {0.1, 0.3, 8});
  auto many = sim_request("create event with bo", 40);
  CHECK(other_seed.complete(many) != sim.complete(many));
}

TEST_CASE("simulator: canonical differences are transferred") {
  // With no resampling the completion is the nearest exemplar rewritten.
  SimulatorBackend sim(sim_background(), {0.1, 0.0, 1, 0.0});
  CHECK(sim.complete(sim_request("find event called \" picnic \"", 1))[0] == "look up the picnic event");
  CHECK(sim.complete(sim_request("find event called \" chess night \"", 1))[0] == "look up the chess night event");
  CHECK(sim.complete(sim_request("create event with ana maria", 1))[0] == "please set up a meeting with ana maria");
  // No exemplar natural contains the differing chunk: fall back to the
  // target canonical without quotes.
  CHECK(sim.complete(sim_request("hello", 1))[0] == "hello");
}

TEST_CASE("simulator: resampling keeps protected tokens and varies words") {
  SimulatorBackend sim(sim_background(), {0.1, 1.0, 3, 0.0});
  auto out = sim.complete(sim_request("find event called \" picnic \"", 200));
  std::set<std::string> distinct(out.begin(), out.end());
  CHECK(distinct.size() > 1);
  for (const auto& s : out) CHECK(s.find("picnic") != std::string::npos);
  // Greedy-ish temperature 0 disables resampling.
  auto cold = sim.complete(sim_request("find event called \" picnic \"", 5, 0.0));
  for (const auto& s : cold) CHECK(s == "look up the picnic event");
}

TEST_CASE("simulator: recall reuses background sentences holding the target content") {
  SimulatorBackend sim(sim_background(), {0.1, 0.0, 4, 1.0});
  // Two background sentences mention picnic; both are recalled.
  auto out = sim.complete(sim_request("find event called \" picnic \"", 200));
  std::set<std::string> distinct(out.begin(), out.end());
  CHECK(distinct == std::set<std::string>{"look up the picnic event", "look for the picnic event"});
  // Near-zero temperature keeps the one closest to the transferred natural.
  for (const auto& s : sim.complete(sim_request("find event called \" picnic \"", 20, 0.0)))
    CHECK(s == "look up the picnic event");
  for (const auto& s : sim.complete(sim_request("create event with bo", 10)))
    CHECK(s == "please arrange a meeting with bo");
  // Nothing mentions zed: the transferred natural is kept.
  for (const auto& s : sim.complete(sim_request("create event with zed", 10)))
    CHECK(s == "please set up a meeting with zed");
}

TEST_CASE("simulator: malformed prompts and config") {
  SimulatorBackend sim(sim_background());
  CompletionRequest r;
  r.prompt = "no structure here";
  CHECK_THROWS_AS(sim.complete(r), RemoteError);
  r.prompt = "C: hello\nN: ";
  CHECK_THROWS_AS(sim.complete(r), RemoteError);
  CHECK_THROWS_AS(SimulatorBackend({}), DataError);
  CHECK_THROWS_AS(SimulatorBackend(sim_background(), {0.0, 0.3, 0}), DataError);
  CHECK_THROWS_AS(SimulatorBackend(sim_background(), {0.1, 1.5, 0}), DataError);
  CHECK_THROWS_AS(SimulatorBackend(sim_background(), {0.1, 0.3, 0, -0.5}), DataError);
}
