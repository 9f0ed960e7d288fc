#pragma once

#include <cstdint>
#include <string>

#include "goldie/json_io.hpp"
#include "goldie/sigma.hpp"
#include "goldie/types.hpp"

namespace goldie::io {

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string fnv1a64_hex(const std::string& bytes) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[std::size_t(i)] = digits[h & 0xf];
  return out;
}

/// Machine-readable outcome of one CLI run. Serialization is deterministic:
/// keys are emitted sorted and no volatile data (timestamps, paths, host
/// info) is recorded, so identical inputs produce identical bytes.
struct RunReport {
  std::string command;
  std::string inputs_digest;
  std::uint64_t seed = 0;
  ResidualStats residuals;
  std::string verdict;  // "pass" | "fail" | "inapplicable"
  Ledger ledger;
  json results = json::object();

  json to_json() const {
    return json{{"schema", "goldie-run-report/1"},
                {"command", command},
                {"inputs_digest", inputs_digest},
                {"seed", seed},
                {"residual_summary",
                 {{"max", residuals.max()},
                  {"mean", residuals.mean()},
                  {"p99", residuals.p99()}}},
                {"verdict", verdict},
                {"ledger", ledger_json(ledger)},
                {"results", results}};
  }

  std::string dump() const { return to_json().dump(2) + "\n"; }
};

}  // namespace goldie::io
