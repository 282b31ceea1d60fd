#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/problems.hpp"
#include "core/simplex.hpp"

// Last-iterate SGD on mixture sample streams, plus the high-probability
// concentration bound it is checked against.
namespace mixmatch::sgd {

struct StepSchedule {
  enum class Mode { kTheoretical, kPractical };
  Mode mode = Mode::kTheoretical;
  double mu = 1;   // theoretical: eta_t = 2 / (mu (t + E))
  double E = 0;    // theoretical offset, > 0
  double eta = 0;  // practical: constant step

  double step(uint64_t t) const {
    return mode == Mode::kTheoretical
               ? 2.0 / (mu * (static_cast<double>(t) + E))
               : eta;
  }

  static StepSchedule theoretical(double mu, double E);
  static StepSchedule practical(double eta);
  // "theoretical" (E supplied by caller via default_E), "theoretical:<E>",
  // or "practical:<eta>".
  static StepSchedule parse(const std::string& spec, double mu, double default_E);
  std::string describe() const;
};

struct Run {
  problems::TrainedModel model;  // final iterate
  uint64_t steps = 0;
  std::vector<double> trace;  // |w_t - w*|^2, length steps+1 when traced
};

class SgdError : public std::runtime_error {
 public:
  SgdError(uint64_t step, const std::string& what)
      : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}
  uint64_t step() const { return step_; }

 private:
  uint64_t step_;
};

// Exactly `steps` oracle draws from the alpha mixture, unprojected updates.
// Pass trace_target = w*(alpha) to record squared distances.
Run run_sgd(const problems::Suite& suite, const simplex::Mixture& alpha,
            const Eigen::VectorXd& w0, uint64_t steps, const StepSchedule& schedule,
            problems::SampleStream& stream,
            const Eigen::VectorXd* trace_target = nullptr);

// Step-schedule offset demanded by the concentration theorem:
// 4096 kappa^2 log(Lambda^8), natural log. Rejects Lambda <= 1.
double compute_E(double kappa, double lambda_budget);

struct Bound {
  uint64_t t = 0;
  double lambda_budget = 0;
  int k = 0;
  double E = 0;  // theorem's own offset, derived from (kappa, lambda_budget)
  double term_g = 0;
  double term_diameter = 0;
  double term_martingale = 0;
  double total = 0;
};

// Worst-case iterate-distance envelope sup_{s <= t} |w_s - w*| under the
// theoretical schedule: growth-recursion upper bound, used as the default D.
double worst_case_diameter(double d0_sq, const problems::Constants& c, double E,
                           uint64_t t);

// High-probability bound on |w_t - w*|^2 at confidence 1 - (t+1)/Lambda^8,
// after k refinement rounds of the variance recursion. D (iterate-distance
// envelope) defaults to worst_case_diameter. Rejects Lambda < t + 1 and
// D < sqrt(d0_sq).
Bound concentration_bound(double d0_sq, const problems::Constants& c,
                     std::optional<double> D, uint64_t t, double lambda_budget,
                     int k);

// Height-independent per-node step budget; lambda + E is the square of the
// bracketed expression. Raw-parameter form plus a convenience overload that
// derives E from (kappa, lambda_budget).
double theoretical_budget(double mu, double kappa, double rho, double E,
                          double lambda_budget, double khat);
double theoretical_budget(const problems::Constants& c, double lambda_budget,
                          double khat);

}  // namespace mixmatch::sgd
