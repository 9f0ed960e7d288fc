#pragma once

#include <memory>
#include <string>
#include <vector>

#include "goldie/gge.hpp"
#include "goldie/types.hpp"

namespace goldie {

/// Client side of the line-delimited JSON evaluator protocol. The child
/// process reads one request per line on stdin,
///   {"f":"K"|"h"|"g","x":[...]}
/// and answers one reply per line on stdout, {"y":[...]} or {"error":"..."}.
/// An error reply becomes a DomainError; a broken pipe or malformed reply
/// becomes a SpecError. Calls are serialized over the single pipe pair, so
/// an evaluator handle must not be shared across threads.
class SubprocessEvaluator {
 public:
  explicit SubprocessEvaluator(std::vector<std::string> argv);
  ~SubprocessEvaluator();

  SubprocessEvaluator(const SubprocessEvaluator&) = delete;
  SubprocessEvaluator& operator=(const SubprocessEvaluator&) = delete;

  std::vector<double> eval(const std::string& f, const Vector& x);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Wraps a child evaluator as a triple. The domain guard probes h and
/// treats an error reply as "outside". dim_x and dim_y must be known to the
/// caller (the protocol does not negotiate them).
GgeTriple subprocess_triple(std::vector<std::string> argv, int dim_x, int dim_y);

}  // namespace goldie
