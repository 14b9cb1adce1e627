// Token-level language models: the abstract interface, an additively smoothed
// n-gram model, and completion backends (remote service client and an
// in-process paraphrase simulator).
#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "privaug/common.hpp"

namespace privaug {

/// Natural-log probabilities over a vocabulary.
struct TokenDistribution {
  std::map<Token, double> entries;

  /// -infinity for tokens outside the distribution.
  double logprob(const Token& t) const;
  /// |sum(exp(entries)) - 1|.
  double normalization_error() const;
};

class TokenLM {
 public:
  virtual ~TokenLM() = default;
  /// `prefix` is the full left context. A begin marker inside it starts a new
  /// sentence: only the tokens after the last begin marker condition the
  /// next token.
  virtual TokenDistribution next_token_logprobs(std::span<const Token> prefix) const = 0;
  /// Log-probabilities of the given candidates; tokens the model does not
  /// know score as the unknown marker when it has one, -infinity otherwise.
  virtual std::vector<double> score_candidates(std::span<const Token> prefix,
                                               std::span<const Token> candidates) const;
};

/// Equal mass on every vocabulary token plus the three markers.
class UniformLM : public TokenLM {
 public:
  explicit UniformLM(const std::set<Token>& vocabulary);
  TokenDistribution next_token_logprobs(std::span<const Token> prefix) const override;
  std::vector<double> score_candidates(std::span<const Token> prefix,
                                       std::span<const Token> candidates) const override;

 private:
  std::set<Token> vocab_;
};

class NGramModel : public TokenLM {
 public:
  int order() const { return order_; }
  double smoothing_alpha() const { return alpha_; }
  /// Sorted; includes the begin, end and unknown markers.
  std::vector<Token> vocabulary() const;
  bool in_vocabulary(const Token& t) const { return ids_.count(t) > 0; }

  /// P(t | prefix) under the smoothing and backoff rule.
  double logprob(std::span<const Token> prefix, const Token& t) const;
  TokenDistribution next_token_logprobs(std::span<const Token> prefix) const override;
  std::vector<double> score_candidates(std::span<const Token> prefix,
                                       std::span<const Token> candidates) const override;

  /// Count of the (possibly shorter) context in training data; 0 if unseen.
  std::size_t context_count(std::span<const Token> context) const;

  /// Self-describing structure holding order, alpha, vocabulary and counts.
  std::string serialize() const;
  static NGramModel deserialize(std::string_view data);

  friend bool operator==(const NGramModel& a, const NGramModel& b) { return a.serialize() == b.serialize(); }

 private:
  friend NGramModel train_ngram(const std::vector<Tokens>&, int, double, const std::set<Token>&);

  struct VecHash {
    std::size_t operator()(const std::vector<int>& v) const;
  };
  struct Context {
    std::size_t total = 0;
    std::unordered_map<int, std::size_t> counts;
  };

  int id_of(const Token& t) const;
  int intern(const Token& t);
  /// Conditioning history: ids of the last order-1 tokens after the last
  /// begin marker, left-padded with begin markers.
  std::vector<int> history(std::span<const Token> prefix) const;
  /// Longest suffix of `hist` seen in training (the empty context always is).
  const Context& backoff(const std::vector<int>& hist) const;
  double logprob_id(const Context& ctx, int id) const;

  int order_ = 1;
  double alpha_ = 1.0;
  std::vector<Token> tokens_;
  std::unordered_map<Token, int> ids_;
  std::unordered_map<std::vector<int>, Context, VecHash> contexts_;
};

/// Additive smoothing: P(t | ctx) = (count(ctx, t) + alpha) / (count(ctx) + alpha |V|)
/// for the longest context suffix seen in training. Stupid backoff scales
/// a shorter context's distribution by 0.4; since every token of a seen context
/// has positive smoothed mass, the factor cancels on renormalization. Each
/// sentence is padded with order-1 begin markers and ends with the end marker.
/// `extra_vocabulary` adds tokens with zero counts. Throws DataError.
NGramModel train_ngram(const std::vector<Tokens>& corpus, int order, double smoothing_alpha,
                       const std::set<Token>& extra_vocabulary = {});

/// Sum of next-token log-probabilities over `tokens` followed by the end marker.
double sequence_logprob(const NGramModel& m, std::span<const Token> tokens);

struct CompletionRequest {
  std::string prompt;
  int max_tokens = 64;
  double temperature = 1.0;
  int n_samples = 1;
  std::optional<std::string> stop;

  /// The wire body; key order is canonical so equal requests hash equally.
  std::string canonical_body() const;
  /// Hex content hash of the canonical body, used as the replay key.
  std::string hash() const;
};

/// Truncates at the first occurrence of `stop`, if any.
std::string truncate_at_stop(const std::string& text, const std::optional<std::string>& stop);

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  /// Exactly req.n_samples completions, each truncated at req.stop.
  virtual std::vector<std::string> complete(const CompletionRequest& req) = 0;
};

enum class ReplayMode { kOff, kRecord, kReplay };

struct RemoteConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080
  int max_in_flight = 4;
  int retries = 3;
  std::chrono::milliseconds backoff{200};
  std::chrono::seconds timeout{30};
  std::string api_key;
  ReplayMode replay_mode = ReplayMode::kOff;
  std::filesystem::path replay_dir;

  /// Fills api_key from PRIVAUG_API_KEY and the replay settings from
  /// PRIVAUG_REPLAY_MODE (record|replay) and PRIVAUG_REPLAY_DIR.
  static RemoteConfig from_environment(std::string endpoint);
};

/// Client for `POST <endpoint>/v1/complete`. Transient failures (connection
/// errors, HTTP 429 and 5xx) are retried with exponential backoff; HTTP 401
/// and 403 raise an authentication error. In record mode every response is
/// written to `<replay_dir>/<request hash>.json`; in replay mode responses come
/// only from that directory. Safe to call from multiple threads; at most
/// max_in_flight requests run at once.
class RemoteClient : public CompletionBackend {
 public:
  explicit RemoteClient(RemoteConfig cfg);
  ~RemoteClient() override;
  std::vector<std::string> complete(const CompletionRequest& req) override;
  const RemoteConfig& config() const { return cfg_; }

 private:
  struct Impl;
  RemoteConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

struct SimulatorConfig {
  /// Additive smoothing of the background bigram counts.
  double alpha = 0.1;
  /// Probability of resampling each resamplable token at temperature 1.
  double resample_rate = 0.1;
  std::uint64_t seed = 0;
  /// Probability that a completion reuses a background sentence containing
  /// the target content instead of the transferred exemplar.
  double recall_rate = 1.0;
};

/// In-process stand-in for a paraphrasing LM. The prompt must hold blocks of
/// `C: <canonical>` / `N: <natural>` lines and end with a `C:` line followed by
/// an empty `N: `. Each completion starts from the natural of an exemplar drawn
/// by softmin of its canonical's token edit distance to the target at the
/// request temperature, rewrites the
/// canonical differences into it, then either recalls a background sentence
/// holding the same content words or keeps the rewrite, and finally resamples
/// words (as paths of zero to two words) from a bigram model of the background
/// corpus given both neighbours. Completions are a deterministic
/// function of the request and the seed, and the backend is safe to share
/// across threads.
class SimulatorBackend : public CompletionBackend {
 public:
  SimulatorBackend(const std::vector<Tokens>& background, SimulatorConfig cfg = {});
  std::vector<std::string> complete(const CompletionRequest& req) override;

 private:
  struct Bigrams;
  std::shared_ptr<const Bigrams> bigrams_;
  SimulatorConfig cfg_;
};

/// One-shot call with settings taken from the environment.
std::vector<std::string> complete_remote(const std::string& endpoint, const CompletionRequest& req);

}  // namespace privaug
