// Shared vocabulary types, error hierarchy and deterministic random helpers.
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace privaug {

using Token = std::string;
using Tokens = std::vector<Token>;
using Rng = std::mt19937_64;

// Reserved markers shared by the language model and the channel.
inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kUnk = "<unk>";
inline constexpr std::string_view kQuote = "\"";

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, datasets, arguments).
class DataError : public Error {
 public:
  using Error::Error;
};

class GrammarError : public DataError {
 public:
  enum class Kind { kSyntax, kUndefinedNonterminal, kAlignmentArity, kInvalid };
  GrammarError(Kind kind, int line, const std::string& msg);
  Kind kind() const { return kind_; }
  int line() const { return line_; }

 private:
  Kind kind_;
  int line_;
};

class NoParseError : public Error {
 public:
  using Error::Error;
};

class DepthExhaustedError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  enum class Kind { kDeadEnd, kLengthExceeded, kEmptyResult };
  DecodeError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class PoolError : public Error {
 public:
  enum class Kind { kMissingCategory, kExhausted, kInvalid };
  PoolError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class RemoteError : public Error {
 public:
  enum class Kind { kNetwork, kMalformedResponse, kAuthentication, kReplayMiss };
  RemoteError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Lowercases, splits double quotes into standalone tokens and splits on whitespace.
Tokens tokenize(std::string_view text);

std::string join(std::span<const Token> tokens, std::string_view sep = " ");

// Platform-independent draws; std distributions are implementation-defined.
std::size_t uniform_index(Rng& rng, std::size_t n);
double uniform_unit(Rng& rng);

/// 64-bit FNV-1a; used for content hashes that must be stable across runs.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

/// Derives an independent seed for a sub-stream (e.g. trial i, canonical j).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace privaug
