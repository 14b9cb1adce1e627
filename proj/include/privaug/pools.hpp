// Replacement pools: per-category lists of slot values used for sampling and
// PII replacement.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "privaug/common.hpp"

namespace privaug {

/// Partition of one pool into labelled groups for two-stage sampling.
struct BalanceGroups {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> members;  // indices into the pool
};

class ReplacementPools {
 public:
  ReplacementPools() = default;

  /// Throws PoolError(kInvalid) on an empty pool, an empty value or a value
  /// containing a quote token.
  void add_category(const std::string& category, std::vector<Tokens> values);

  /// Groups must be disjoint and cover the category's pool.
  void set_balance_groups(const std::string& category, BalanceGroups groups);

  bool has(const std::string& category) const { return pools_.count(category) > 0; }
  /// Throws PoolError(kMissingCategory).
  const std::vector<Tokens>& values(const std::string& category) const;
  const BalanceGroups* balance_groups(const std::string& category) const;

  std::vector<std::string> categories() const;
  const std::map<std::string, std::vector<Tokens>>& all() const { return pools_; }

  /// True when no value of this set appears in any pool of `other`.
  bool disjoint_from(const ReplacementPools& other) const;

 private:
  std::map<std::string, std::vector<Tokens>> pools_;
  std::map<std::string, BalanceGroups> groups_;
};

/// Reads `<dir>/<category>.txt` (one value per line) and optional
/// `<dir>/<category>.groups` lines of the form `<first>-<last> <label>`
/// (1-based inclusive line ranges into the pool file).
ReplacementPools load_pools(const std::filesystem::path& dir);

void save_pools(const ReplacementPools& pools, const std::filesystem::path& dir);

}  // namespace privaug
