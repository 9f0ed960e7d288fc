#include "goldie/subprocess.hpp"

#include <csignal>
#include <cstdio>
#include <cstring>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

namespace goldie {

namespace {

void ignore_sigpipe_once() {
  static const int installed = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return 0;
  }();
  (void)installed;
}

}  // namespace

struct SubprocessEvaluator::Impl {
  pid_t pid = -1;
  std::FILE* to_child = nullptr;
  std::FILE* from_child = nullptr;

  ~Impl() {
    if (to_child != nullptr) std::fclose(to_child);
    if (from_child != nullptr) std::fclose(from_child);
    if (pid > 0) {
      int status = 0;
      waitpid(pid, &status, 0);
    }
  }
};

SubprocessEvaluator::SubprocessEvaluator(std::vector<std::string> argv)
    : impl_(std::make_unique<Impl>()) {
  if (argv.empty())
    throw SpecError("SubprocessEvaluator: empty command line");
  ignore_sigpipe_once();

  int to_child[2];
  int from_child[2];
  if (pipe(to_child) != 0 || pipe(from_child) != 0)
    throw SpecError("SubprocessEvaluator: pipe creation failed");

  const pid_t pid = fork();
  if (pid < 0) throw SpecError("SubprocessEvaluator: fork failed");

  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (std::string& a : argv) args.push_back(a.data());
    args.push_back(nullptr);
    execvp(args[0], args.data());
    std::_Exit(127);
  }

  close(to_child[0]);
  close(from_child[1]);
  impl_->pid = pid;
  impl_->to_child = fdopen(to_child[1], "w");
  impl_->from_child = fdopen(from_child[0], "r");
  if (impl_->to_child == nullptr || impl_->from_child == nullptr)
    throw SpecError("SubprocessEvaluator: fdopen failed");
}

SubprocessEvaluator::~SubprocessEvaluator() = default;

std::vector<double> SubprocessEvaluator::eval(const std::string& f,
                                              const Vector& x) {
  nlohmann::json req{{"f", f}};
  nlohmann::json coords = nlohmann::json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) coords.push_back(x(i));
  req["x"] = coords;
  const std::string line = req.dump();

  if (std::fputs(line.c_str(), impl_->to_child) == EOF ||
      std::fputc('\n', impl_->to_child) == EOF ||
      std::fflush(impl_->to_child) != 0)
    throw SpecError("SubprocessEvaluator: evaluator pipe closed");

  std::string reply;
  for (int c = std::fgetc(impl_->from_child); c != '\n';
       c = std::fgetc(impl_->from_child)) {
    if (c == EOF) throw SpecError("SubprocessEvaluator: evaluator terminated");
    reply.push_back(static_cast<char>(c));
  }

  nlohmann::json j = nlohmann::json::parse(reply, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw SpecError("SubprocessEvaluator: malformed reply: " + reply);
  if (j.contains("error"))
    throw DomainError("evaluator error: " + j["error"].dump());
  if (!j.contains("y") || !j["y"].is_array())
    throw SpecError("SubprocessEvaluator: reply lacks a \"y\" array");

  std::vector<double> y;
  y.reserve(j["y"].size());
  for (const auto& v : j["y"]) {
    if (!v.is_number())
      throw SpecError("SubprocessEvaluator: non-numeric reply entry");
    y.push_back(v.get<double>());
  }
  return y;
}

GgeTriple subprocess_triple(std::vector<std::string> argv, int dim_x, int dim_y) {
  auto ev = std::make_shared<SubprocessEvaluator>(std::move(argv));

  const auto scalar = [ev](const std::string& f, const Vector& x) {
    const std::vector<double> y = ev->eval(f, x);
    if (y.size() != 1)
      throw SpecError("subprocess_triple: expected a scalar reply for " + f);
    return y[0];
  };

  VectorFn K = [ev, dim_y](const Vector& x) {
    const std::vector<double> y = ev->eval("K", x);
    if (int(y.size()) != dim_y)
      throw SpecError("subprocess_triple: K reply has wrong dimension");
    Vector out(dim_y);
    for (int i = 0; i < dim_y; ++i) out(i) = y[std::size_t(i)];
    return out;
  };
  ScalarFn h = [scalar](const Vector& x) { return scalar("h", x); };
  ScalarFn g = [scalar](const Vector& x) { return scalar("g", x); };
  GuardFn domain = [scalar](const Vector& x) {
    try {
      return std::isfinite(scalar("h", x));
    } catch (const DomainError&) {
      return false;
    }
  };

  return GgeTriple::make(std::move(K), std::move(h), std::move(g),
                         std::move(domain), dim_x, dim_y);
}

}  // namespace goldie
