#include "privaug/pools.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace privaug {

void ReplacementPools::add_category(const std::string& category, std::vector<Tokens> values) {
  if (category.empty()) throw PoolError(PoolError::Kind::kInvalid, "empty pool category name");
  if (values.empty())
    throw PoolError(PoolError::Kind::kInvalid, "pool '" + category + "' is empty");
  for (const auto& v : values) {
    if (v.empty())
      throw PoolError(PoolError::Kind::kInvalid, "pool '" + category + "' has an empty value");
    if (std::find(v.begin(), v.end(), kQuote) != v.end())
      throw PoolError(PoolError::Kind::kInvalid,
                      "pool '" + category + "' value contains a quote: " + join(v));
  }
  groups_.erase(category);
  pools_[category] = std::move(values);
}

void ReplacementPools::set_balance_groups(const std::string& category, BalanceGroups groups) {
  const auto& pool = values(category);
  if (groups.labels.size() != groups.members.size() || groups.members.empty())
    throw PoolError(PoolError::Kind::kInvalid, "malformed balance groups for " + category);
  std::vector<int> seen(pool.size(), 0);
  for (const auto& g : groups.members) {
    if (g.empty()) throw PoolError(PoolError::Kind::kInvalid, "empty balance group in " + category);
    for (auto idx : g) {
      if (idx >= pool.size())
        throw PoolError(PoolError::Kind::kInvalid, "balance group index out of range in " + category);
      if (seen[idx]++)
        throw PoolError(PoolError::Kind::kInvalid, "balance groups overlap in " + category);
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw PoolError(PoolError::Kind::kInvalid, "balance groups do not cover pool " + category);
  groups_[category] = std::move(groups);
}

const std::vector<Tokens>& ReplacementPools::values(const std::string& category) const {
  auto it = pools_.find(category);
  if (it == pools_.end())
    throw PoolError(PoolError::Kind::kMissingCategory, "no pool for category '" + category + "'");
  return it->second;
}

const BalanceGroups* ReplacementPools::balance_groups(const std::string& category) const {
  auto it = groups_.find(category);
  return it == groups_.end() ? nullptr : &it->second;
}

std::vector<std::string> ReplacementPools::categories() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : pools_) out.push_back(k);
  return out;
}

bool ReplacementPools::disjoint_from(const ReplacementPools& other) const {
  std::set<Tokens> theirs;
  for (const auto& [_, vals] : other.pools_) theirs.insert(vals.begin(), vals.end());
  for (const auto& [_, vals] : pools_)
    for (const auto& v : vals)
      if (theirs.count(v)) return false;
  return true;
}

ReplacementPools load_pools(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("pool directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  ReplacementPools pools;
  for (const auto& file : files) {
    std::ifstream in(file);
    std::vector<Tokens> values;
    std::string line;
    while (std::getline(in, line)) {
      auto toks = tokenize(line);
      if (!toks.empty()) values.push_back(std::move(toks));
    }
    const auto category = file.stem().string();
    pools.add_category(category, std::move(values));

    auto groups_file = file;
    groups_file.replace_extension(".groups");
    if (!fs::exists(groups_file)) continue;
    std::ifstream gin(groups_file);
    BalanceGroups groups;
    int lineno = 0;
    while (std::getline(gin, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::istringstream ls(line);
      std::string range, label;
      std::size_t first = 0, last = 0;
      char dash = 0;
      if (!(ls >> range >> label))
        throw DataError(groups_file.string() + ":" + std::to_string(lineno) + ": expected '<a>-<b> <label>'");
      std::istringstream rs(range);
      if (!(rs >> first >> dash >> last) || dash != '-' || first == 0 || last < first)
        throw DataError(groups_file.string() + ":" + std::to_string(lineno) + ": bad range '" + range + "'");
      std::vector<std::size_t> members;
      for (auto i = first; i <= last; ++i) members.push_back(i - 1);
      groups.labels.push_back(label);
      groups.members.push_back(std::move(members));
    }
    pools.set_balance_groups(category, std::move(groups));
  }
  return pools;
}

void save_pools(const ReplacementPools& pools, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [category, values] : pools.all()) {
    std::ofstream out(dir / (category + ".txt"));
    for (const auto& v : values) out << join(v) << '\n';
    if (const auto* groups = pools.balance_groups(category)) {
      // Contiguous ranges only; groups loaded from disk always are.
      std::ofstream gout(dir / (category + ".groups"));
      for (std::size_t g = 0; g < groups->labels.size(); ++g) {
        const auto& m = groups->members[g];
        gout << (m.front() + 1) << '-' << (m.back() + 1) << ' ' << groups->labels[g] << '\n';
      }
    }
  }
}

}  // namespace privaug
