// Evaluation: top-1 exact match, multi-trial reports, the paired t-test and
// the synthetic benchmark generator.
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "privaug/augment.hpp"
#include "privaug/common.hpp"
#include "privaug/parser.hpp"
#include "privaug/pools.hpp"
#include "privaug/scfg.hpp"

namespace privaug {

/// Percentage of pairs whose parse_top1 canonical equals the gold canonical
/// token for token; a failed parse counts as a miss. Throws DataError on an
/// empty test set.
double top1_match(const NoisyChannelParser& p, const std::vector<ParallelPair>& test);

struct TrialReport {
  std::string method;
  std::vector<double> top1;
  std::vector<std::uint64_t> seeds;
  double mean = 0.0;
  /// Sample standard deviation (n - 1 denominator).
  double stddev = 0.0;

  /// Fills mean and stddev from top1. Throws DataError on fewer than 2 trials.
  static TrialReport from_values(std::string method, std::vector<double> top1, std::vector<std::uint64_t> seeds);
  std::string to_json() const;
  static TrialReport from_json(std::string_view text);
};

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);
/// Two-sided p-value of Student's t with `dof` degrees of freedom.
double student_t_two_sided(double t, double dof);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t dof = 0;
};

/// Paired t-test on a[i] - b[i]. Throws DataError on mismatched or short
/// inputs and when the differences are equal up to rounding (zero variance).
TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

struct BenchmarkSizes {
  std::size_t seed = 30;
  std::size_t unlabeled = 300;
  std::size_t test = 200;
  /// Sentences of simulator background text.
  std::size_t background = 2000;
};

/// Benchmark description, usually read from a JSON file whose relative paths
/// resolve against the file's directory.
struct BenchmarkSpec {
  std::filesystem::path grammar;
  std::filesystem::path generator_pools;
  std::filesystem::path replacement_pools;
  std::filesystem::path templates;
  std::filesystem::path synonyms;
  double synonym_rate = 0.3;
  double drop_rate = 0.1;
  int max_depth = 4;
  BenchmarkSizes sizes;

  static BenchmarkSpec from_json_file(const std::filesystem::path& path);
};

struct SyntheticBenchmark {
  Grammar grammar;
  /// Slot values of the simulated users.
  ReplacementPools generator_pools;
  /// Values available to the augmentation pipeline; disjoint from the above.
  ReplacementPools replacement_pools;
  /// Natural templates per production (by grammar position). `{k}` is the
  /// k-th nonterminal or slot of the production.
  std::vector<std::vector<std::string>> templates;
  /// Alternatives for template words; each alternative may span tokens.
  std::map<Token, std::vector<Tokens>> synonyms;
  double synonym_rate = 0.3;
  double drop_rate = 0.1;
  int max_depth = 4;
  BenchmarkSizes sizes;

  /// A uniformly chosen template per node with slot values and child
  /// renderings substituted. Each template word is then, independently,
  /// swapped for a uniform synonym with probability synonym_rate (if it has
  /// any) or else dropped with probability drop_rate.
  Tokens render_natural(const Derivation& d, Rng& rng) const;
};

/// Throws DataError, GrammarError or PoolError; a DataError names the first
/// production without a template.
SyntheticBenchmark load_benchmark(const BenchmarkSpec& spec);
SyntheticBenchmark make_benchmark(Grammar grammar, ReplacementPools generator_pools,
                                  ReplacementPools replacement_pools, std::vector<std::vector<std::string>> templates,
                                  std::map<Token, std::vector<Tokens>> synonyms, double synonym_rate,
                                  double drop_rate, BenchmarkSizes sizes, int max_depth = 4);

struct BenchmarkSplits {
  std::vector<ParallelPair> seed;
  /// Gold pairs behind the unlabeled set; only the naturals are exposed to
  /// augmentation.
  std::vector<ParallelPair> unlabeled_gold;
  std::vector<ParallelPair> test;
  /// Noisy renderings with replacement-pool values, the simulator's text.
  std::vector<Tokens> background;

  UnlabeledSet unlabeled() const;
};

/// Samples derivations with generator-pool values and renders them until the
/// three splits are filled with distinct pairs. Throws DataError when the
/// benchmark cannot produce enough distinct pairs.
BenchmarkSplits sample_splits(const SyntheticBenchmark& bench, Rng& rng);

struct MethodConfig {
  std::string name;
  /// No augmentation: the parser trained on the seed alone.
  bool baseline = false;
  int iterations = 1;
  PipelineConfig pipeline;
  SimulatorConfig simulator;

  /// Reads a JSON method file; absent keys keep their defaults.
  static MethodConfig from_json(std::string_view text);
  static MethodConfig from_json_file(const std::filesystem::path& path);
};

/// Runs `n_trials` trials; trial i uses seed base_seed + i for its splits and
/// pipeline, so reports of different methods with the same base seed are
/// paired. Throws DataError if n_trials < 2.
TrialReport run_trials(const SyntheticBenchmark& bench, const MethodConfig& method, std::size_t n_trials,
                       std::uint64_t base_seed);

/// One trial of `method` on splits drawn with `seed`; returns top-1 on the
/// test split.
double run_trial(const SyntheticBenchmark& bench, const MethodConfig& method, std::uint64_t seed);

}  // namespace privaug
