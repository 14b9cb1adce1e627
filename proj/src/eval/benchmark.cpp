#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "privaug/eval.hpp"

namespace privaug {

namespace {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// Production text as written in a grammar file, without the template.
std::string production_signature(const SyncProduction& p) {
  std::string out = p.lhs + " ->";
  for (const auto& s : p.canonical_rhs) {
    if (s.is_terminal()) out += " " + s.name;
    else if (s.is_slot()) out += " <slot:" + s.name + ">";
    else out += " <" + s.name + ">";
  }
  return out;
}

std::optional<std::size_t> hole_index(const Token& t) {
  if (t.size() < 3 || t.front() != '{' || t.back() != '}') return std::nullopt;
  std::size_t k = 0;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    if (t[i] < '0' || t[i] > '9') return std::nullopt;
    k = k * 10 + static_cast<std::size_t>(t[i] - '0');
  }
  return k;
}

}  // namespace

BenchmarkSpec BenchmarkSpec::from_json_file(const std::filesystem::path& path) {
  const auto j = read_json_file(path);
  const auto base = path.parent_path();
  BenchmarkSpec s;
  try {
    auto resolve = [&](const char* key) { return base / j.at(key).get<std::string>(); };
    s.grammar = resolve("grammar");
    s.generator_pools = resolve("generator_pools");
    s.replacement_pools = resolve("replacement_pools");
    s.templates = resolve("templates");
    s.synonyms = resolve("synonyms");
    s.synonym_rate = j.value("synonym_rate", s.synonym_rate);
    s.drop_rate = j.value("drop_rate", s.drop_rate);
    s.max_depth = j.value("max_depth", s.max_depth);
    if (j.contains("sizes")) {
      const auto& z = j.at("sizes");
      s.sizes.seed = z.value("seed", s.sizes.seed);
      s.sizes.unlabeled = z.value("unlabeled", s.sizes.unlabeled);
      s.sizes.test = z.value("test", s.sizes.test);
      s.sizes.background = z.value("background", s.sizes.background);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return s;
}

SyntheticBenchmark make_benchmark(Grammar grammar, ReplacementPools generator_pools,
                                  ReplacementPools replacement_pools, std::vector<std::vector<std::string>> templates,
                                  std::map<Token, std::vector<Tokens>> synonyms, double synonym_rate,
                                  double drop_rate, BenchmarkSizes sizes, int max_depth) {
  const auto& prods = grammar.productions();
  if (templates.size() != prods.size()) throw DataError("benchmark: one template list per production required");
  for (std::size_t i = 0; i < prods.size(); ++i) {
    if (templates[i].empty())
      throw DataError("benchmark: production '" + production_signature(*prods[i]) + "' has no natural template");
    for (const auto& t : templates[i]) {
      std::set<std::size_t> holes;
      for (const auto& tok : tokenize(t))
        if (auto k = hole_index(tok)) holes.insert(*k);
      if (holes.size() != prods[i]->arity() || (!holes.empty() && *holes.rbegin() + 1 != holes.size()))
        throw DataError("benchmark: template '" + t + "' must use holes {0}..{" +
                        std::to_string(prods[i]->arity()) + "} once each for '" +
                        production_signature(*prods[i]) + "'");
    }
  }
  for (const auto& cat : grammar.slot_categories()) {
    generator_pools.values(cat);
    replacement_pools.values(cat);
  }
  if (!generator_pools.disjoint_from(replacement_pools))
    throw DataError("benchmark: generator and replacement pools must be disjoint");
  if (synonym_rate < 0 || synonym_rate > 1 || drop_rate < 0 || drop_rate > 1)
    throw DataError("benchmark: noise rates must lie in [0, 1]");
  for (const auto& [word, alts] : synonyms)
    for (const auto& alt : alts)
      if (alt.empty()) throw DataError("benchmark: empty synonym for '" + word + "'");
  return {std::move(grammar), std::move(generator_pools), std::move(replacement_pools), std::move(templates),
          std::move(synonyms), synonym_rate, drop_rate, max_depth, sizes};
}

SyntheticBenchmark load_benchmark(const BenchmarkSpec& spec) {
  auto grammar = load_grammar_file(spec.grammar);
  std::map<std::string, std::vector<std::string>> by_signature;
  const auto tj = read_json_file(spec.templates);
  try {
    for (const auto& entry : tj.at("productions"))
      by_signature[entry.at("production").get<std::string>()] = entry.at("templates").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(spec.templates.string() + ": " + e.what());
  }
  std::vector<std::vector<std::string>> templates;
  for (const auto& p : grammar.productions()) {
    auto it = by_signature.find(production_signature(*p));
    templates.push_back(it == by_signature.end() ? std::vector<std::string>{} : it->second);
  }
  std::map<Token, std::vector<Tokens>> synonyms;
  const auto sj = read_json_file(spec.synonyms);
  try {
    for (const auto& [word, alts] : sj.items())
      for (const auto& alt : alts) synonyms[word].push_back(tokenize(alt.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(spec.synonyms.string() + ": " + e.what());
  }
  return make_benchmark(std::move(grammar), load_pools(spec.generator_pools), load_pools(spec.replacement_pools),
                        std::move(templates), std::move(synonyms), spec.synonym_rate, spec.drop_rate, spec.sizes,
                        spec.max_depth);
}

Tokens SyntheticBenchmark::render_natural(const Derivation& d, Rng& rng) const {
  const auto& options = templates.at(d.production->index);
  const auto& tmpl = options[uniform_index(rng, options.size())];
  Tokens out;
  for (const auto& tok : tokenize(tmpl)) {
    if (auto k = hole_index(tok)) {
      const auto& child = d.children.at(*k);
      const auto inner = child.is_slot() ? child.slot().value : render_natural(child.derivation(), rng);
      out.insert(out.end(), inner.begin(), inner.end());
      continue;
    }
    if (tok == kQuote) {
      out.push_back(tok);
      continue;
    }
    auto syn = synonyms.find(tok);
    if (syn != synonyms.end() && uniform_unit(rng) < synonym_rate) {
      const auto& alt = syn->second[uniform_index(rng, syn->second.size())];
      out.insert(out.end(), alt.begin(), alt.end());
    } else if (uniform_unit(rng) >= drop_rate) {
      out.push_back(tok);
    }
  }
  return out;
}

UnlabeledSet BenchmarkSplits::unlabeled() const {
  UnlabeledSet u;
  for (const auto& p : unlabeled_gold) u.utterances.push_back(p.natural);
  return u;
}

BenchmarkSplits sample_splits(const SyntheticBenchmark& bench, Rng& rng) {
  const auto& z = bench.sizes;
  const std::size_t needed = z.seed + z.unlabeled + z.test;
  std::set<ParallelPair> seen;
  std::vector<ParallelPair> pairs;
  for (std::size_t attempt = 0; pairs.size() < needed; ++attempt) {
    if (attempt >= 100 * needed + 1000)
      throw DataError("benchmark: only " + std::to_string(pairs.size()) + " distinct pairs after " +
                      std::to_string(attempt) + " draws; " + std::to_string(needed) + " needed");
    auto d = sample_derivation(bench.grammar, rng, bench.max_depth, bench.generator_pools);
    ParallelPair p{bench.render_natural(d, rng), render_canonical(d)};
    if (p.natural.empty()) continue;
    if (seen.insert(p).second) pairs.push_back(std::move(p));
  }
  BenchmarkSplits s;
  auto take = [&](std::size_t from, std::size_t n) {
    return std::vector<ParallelPair>(pairs.begin() + static_cast<std::ptrdiff_t>(from),
                                     pairs.begin() + static_cast<std::ptrdiff_t>(from + n));
  };
  s.seed = take(0, z.seed);
  s.unlabeled_gold = take(z.seed, z.unlabeled);
  s.test = take(z.seed + z.unlabeled, z.test);
  while (s.background.size() < z.background) {
    auto d = sample_derivation(bench.grammar, rng, bench.max_depth, bench.replacement_pools);
    auto n = bench.render_natural(d, rng);
    if (!n.empty()) s.background.push_back(std::move(n));
  }
  return s;
}

}  // namespace privaug
