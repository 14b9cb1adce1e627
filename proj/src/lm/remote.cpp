#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "privaug/lm.hpp"

namespace privaug {

namespace {

nlohmann::ordered_json body_json(const CompletionRequest& req) {
  nlohmann::ordered_json j;
  j["prompt"] = req.prompt;
  j["max_tokens"] = req.max_tokens;
  j["temperature"] = req.temperature;
  j["n"] = req.n_samples;
  j["stop"] = req.stop ? nlohmann::ordered_json(*req.stop) : nlohmann::ordered_json(nullptr);
  return j;
}

std::vector<std::string> parse_completions(const std::string& body, const CompletionRequest& req) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError(RemoteError::Kind::kMalformedResponse, std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("completions") || !j["completions"].is_array())
    throw RemoteError(RemoteError::Kind::kMalformedResponse, "response lacks a completions array");
  std::vector<std::string> out;
  for (const auto& c : j["completions"]) {
    if (!c.is_string()) throw RemoteError(RemoteError::Kind::kMalformedResponse, "completion is not a string");
    out.push_back(truncate_at_stop(c.get<std::string>(), req.stop));
  }
  if (out.size() != static_cast<std::size_t>(req.n_samples))
    throw RemoteError(RemoteError::Kind::kMalformedResponse,
                      "expected " + std::to_string(req.n_samples) + " completions, got " + std::to_string(out.size()));
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string CompletionRequest::canonical_body() const {
  if (n_samples < 1 || max_tokens < 1 || temperature < 0.0)
    throw DataError("completion request: n >= 1, max_tokens >= 1 and temperature >= 0 required");
  return body_json(*this).dump();
}

std::string CompletionRequest::hash() const { return hex64(fnv1a64(canonical_body())); }

std::string truncate_at_stop(const std::string& text, const std::optional<std::string>& stop) {
  if (!stop || stop->empty()) return text;
  auto pos = text.find(*stop);
  return pos == std::string::npos ? text : text.substr(0, pos);
}

RemoteConfig RemoteConfig::from_environment(std::string endpoint) {
  RemoteConfig cfg;
  cfg.endpoint = std::move(endpoint);
  if (const char* key = std::getenv("PRIVAUG_API_KEY")) cfg.api_key = key;
  if (const char* dir = std::getenv("PRIVAUG_REPLAY_DIR")) cfg.replay_dir = dir;
  if (const char* mode = std::getenv("PRIVAUG_REPLAY_MODE")) {
    const std::string m = mode;
    if (m == "record") cfg.replay_mode = ReplayMode::kRecord;
    else if (m == "replay") cfg.replay_mode = ReplayMode::kReplay;
    else if (!m.empty() && m != "off") throw DataError("PRIVAUG_REPLAY_MODE must be record, replay or off");
  }
  if (cfg.replay_mode != ReplayMode::kOff && cfg.replay_dir.empty())
    throw DataError("PRIVAUG_REPLAY_DIR is required when a replay mode is set");
  return cfg;
}

struct RemoteClient::Impl {
  explicit Impl(int cap) : in_flight(cap) {}
  std::counting_semaphore<1024> in_flight;
};

RemoteClient::RemoteClient(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.max_in_flight < 1 || cfg_.max_in_flight > 1024) throw DataError("max_in_flight must be in [1, 1024]");
  if (cfg_.retries < 0) throw DataError("retries must be non-negative");
  impl_ = std::make_unique<Impl>(cfg_.max_in_flight);
}

RemoteClient::~RemoteClient() = default;

std::vector<std::string> RemoteClient::complete(const CompletionRequest& req) {
  const auto body = req.canonical_body();
  const auto file = cfg_.replay_dir / (req.hash() + ".json");
  if (cfg_.replay_mode == ReplayMode::kReplay) {
    if (!std::filesystem::exists(file))
      throw RemoteError(RemoteError::Kind::kReplayMiss, "no recording for request " + req.hash());
    auto rec = nlohmann::json::parse(read_file(file), nullptr, false);
    if (rec.is_discarded() || !rec.contains("response"))
      throw RemoteError(RemoteError::Kind::kMalformedResponse, "bad recording " + file.string());
    return parse_completions(rec["response"].dump(), req);
  }

  struct Permit {
    std::counting_semaphore<1024>& sem;
    explicit Permit(std::counting_semaphore<1024>& s) : sem(s) { sem.acquire(); }
    ~Permit() { sem.release(); }
  };

  std::string response;
  std::string last_error = "no attempt made";
  bool ok = false;
  auto delay = cfg_.backoff;
  for (int attempt = 0; attempt <= cfg_.retries && !ok; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    Permit permit(impl_->in_flight);
    httplib::Client client(cfg_.endpoint);
    client.set_connection_timeout(cfg_.timeout);
    client.set_read_timeout(cfg_.timeout);
    client.set_write_timeout(cfg_.timeout);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    auto res = client.Post("/v1/complete", headers, body, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw RemoteError(RemoteError::Kind::kAuthentication, "endpoint rejected credentials (HTTP " +
                                                                std::to_string(res->status) + ")");
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw RemoteError(RemoteError::Kind::kNetwork, "request rejected with HTTP " + std::to_string(res->status));
    response = res->body;
    ok = true;
  }
  if (!ok)
    throw RemoteError(RemoteError::Kind::kNetwork,
                      "giving up after " + std::to_string(cfg_.retries) + " retries: " + last_error);
  auto completions = parse_completions(response, req);

  if (cfg_.replay_mode == ReplayMode::kRecord) {
    std::filesystem::create_directories(cfg_.replay_dir);
    nlohmann::ordered_json rec;
    rec["request"] = nlohmann::ordered_json::parse(body);
    rec["response"]["completions"] = nlohmann::json::parse(response)["completions"];
    std::ofstream out(file, std::ios::binary);
    out << rec.dump(2) << '\n';
  }
  return completions;
}

std::vector<std::string> complete_remote(const std::string& endpoint, const CompletionRequest& req) {
  RemoteClient client(RemoteConfig::from_environment(endpoint));
  return client.complete(req);
}

}  // namespace privaug
