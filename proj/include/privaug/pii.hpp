// Structural PII detection over derivations, replacement from pools and a
// containment scan that verifies no original value survives.
#pragma once

#include <set>
#include <vector>

#include "privaug/common.hpp"
#include "privaug/lm.hpp"
#include "privaug/pools.hpp"
#include "privaug/scfg.hpp"

namespace privaug {

struct PIISpan {
  /// Child indices from the root down to the SlotFill.
  std::vector<std::size_t> path;
  std::string category;
  Tokens value;
};

/// Every SlotFill of `d`, in left-to-right canonical order.
std::vector<PIISpan> detect_pii(const Derivation& d);

/// Same tree with every slot value redrawn from its category's pool. Draws are
/// two-stage (uniform group, then uniform member) when the category has
/// balance groups. A draw never contains the original value nor any value in
/// `exclude` as a contiguous subsequence; after `pool size` rejected draws the
/// value is taken uniformly from the remaining admissible values. Throws
/// PoolError (kMissingCategory, kExhausted).
Derivation replace_pii(const Derivation& d, const ReplacementPools& pools, Rng& rng,
                       const std::set<Tokens>& exclude = {});

struct Leak {
  std::size_t sentence;
  std::size_t position;
  Tokens value;

  friend bool operator==(const Leak&, const Leak&) = default;
};

/// Every contiguous occurrence of an original value in the corpus, ordered by
/// (sentence, position, value). Empty when no value leaks.
std::vector<Leak> assert_no_leak(const std::set<Tokens>& original_values, const std::vector<Tokens>& corpus);

struct PoolFillParams {
  std::size_t count = 50;
  int max_rounds = 20;
  int samples_per_round = 8;
  double temperature = 1.0;
  int max_tokens = 16;
};

/// New values for `category` requested from a completion backend. Each round
/// sends one list-continuation prompt holding the examples in an order drawn
/// from `rng`. A completion is kept when it is non-empty, has no quote token,
/// is not an example or an earlier value, and neither contains nor is
/// contained in any value of `avoid`. Stops at `count` values or after
/// max_rounds rounds, returning values in the order they were found. Throws
/// PoolError(kInvalid) when `examples` is empty.
std::vector<Tokens> fill_pool(CompletionBackend& backend, const std::string& category,
                              const std::vector<Tokens>& examples, const PoolFillParams& params, Rng& rng,
                              const std::set<Tokens>& avoid = {});

}  // namespace privaug
