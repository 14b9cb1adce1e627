#include <fstream>

#include "json.hpp"
#include "privaug/augment.hpp"

namespace privaug {

namespace {

using nlohmann::ordered_json;

std::vector<nlohmann::json> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!out.back().is_object()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": not an object");
  }
  return out;
}

std::string field(const nlohmann::json& r, const char* name, const std::filesystem::path& path) {
  auto it = r.find(name);
  if (it == r.end() || !it->is_string())
    throw DataError(path.string() + ": record lacks string field '" + name + "'");
  return it->get<std::string>();
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<ParallelPair> read_pairs_jsonl(const std::filesystem::path& path) {
  std::vector<ParallelPair> out;
  for (const auto& r : read_records(path))
    out.push_back({tokenize(field(r, "natural", path)), tokenize(field(r, "canonical", path))});
  return out;
}

void write_pairs_jsonl(const std::filesystem::path& path, const std::vector<ParallelPair>& pairs) {
  auto out = open_out(path);
  for (const auto& p : pairs)
    out << ordered_json{{"natural", join(p.natural)}, {"canonical", join(p.canonical)}}.dump() << '\n';
}

UnlabeledSet read_unlabeled_jsonl(const std::filesystem::path& path) {
  UnlabeledSet out;
  for (const auto& r : read_records(path)) {
    auto t = tokenize(field(r, "natural", path));
    if (!t.empty()) out.utterances.push_back(std::move(t));
  }
  return out;
}

void write_unlabeled_jsonl(const std::filesystem::path& path, const UnlabeledSet& u) {
  auto out = open_out(path);
  for (const auto& n : u.utterances) out << ordered_json{{"natural", join(n)}}.dump() << '\n';
}

void write_canonicals_jsonl(const std::filesystem::path& path, const CanonicalSet& set) {
  auto out = open_out(path);
  for (const auto& c : set.rendered())
    out << ordered_json{{"canonical", join(c)}, {"provenance", to_string(set.provenance)}}.dump() << '\n';
}

void write_silver_jsonl(const std::filesystem::path& path, const std::vector<SilverPair>& silver) {
  auto out = open_out(path);
  for (const auto& s : silver)
    out << ordered_json{{"natural", join(s.natural)},
                        {"canonical", join(s.canonical)},
                        {"provenance", to_string(s.provenance)},
                        {"filter_kind", to_string(s.filter_kind)},
                        {"filter_score", s.filter_score}}
               .dump()
        << '\n';
}

std::vector<SilverPair> read_silver_jsonl(const std::filesystem::path& path, const Grammar& g) {
  std::vector<SilverPair> out;
  for (const auto& r : read_records(path)) {
    SilverPair s;
    s.natural = tokenize(field(r, "natural", path));
    s.canonical = tokenize(field(r, "canonical", path));
    s.derivation = parse_canonical(g, s.canonical);
    s.provenance = provenance_from_string(field(r, "provenance", path));
    s.filter_kind = filter_kind_from_string(field(r, "filter_kind", path));
    auto score = r.find("filter_score");
    if (score == r.end() || !score->is_number()) throw DataError(path.string() + ": record lacks filter_score");
    s.filter_score = score->get<double>();
    out.push_back(std::move(s));
  }
  return out;
}

void write_report_json(const std::filesystem::path& path, const IterationReport& r) {
  ordered_json j{{"iteration", r.iteration},
                 {"status", r.status},
                 {"canonicals", r.canonicals},
                 {"generate_skipped", r.generate_skipped},
                 {"simulated", r.simulated},
                 {"candidates", r.candidates},
                 {"accepted", r.accepted},
                 {"silver_total", r.silver_total},
                 {"training_pairs", r.training_pairs},
                 {"cycle_success_rate", r.cycle_success_rate}};
  if (r.status != "ok") {
    j["failed_stage"] = r.failed_stage;
    j["error"] = r.error;
  }
  open_out(path) << j.dump(2) << '\n';
}

}  // namespace privaug
