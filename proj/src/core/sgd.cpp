#include "core/sgd.hpp"

#include <cmath>

#include "core/textio.hpp"

namespace mixmatch::sgd {

StepSchedule StepSchedule::theoretical(double mu, double E) {
  if (mu <= 0) throw std::invalid_argument("schedule: mu must be > 0");
  if (E <= 0) throw std::invalid_argument("schedule: E must be > 0");
  StepSchedule s;
  s.mode = Mode::kTheoretical;
  s.mu = mu;
  s.E = E;
  return s;
}

StepSchedule StepSchedule::practical(double eta) {
  if (eta <= 0) throw std::invalid_argument("schedule: eta must be > 0");
  StepSchedule s;
  s.mode = Mode::kPractical;
  s.eta = eta;
  return s;
}

StepSchedule StepSchedule::parse(const std::string& spec, double mu,
                                 double default_E) {
  if (spec == "theoretical") return theoretical(mu, default_E);
  if (spec.rfind("theoretical:", 0) == 0)
    return theoretical(mu, std::stod(spec.substr(12)));
  if (spec.rfind("practical:", 0) == 0)
    return practical(std::stod(spec.substr(10)));
  throw std::invalid_argument(
      "schedule must be 'theoretical[:E]' or 'practical:<eta>', got '" + spec + "'");
}

std::string StepSchedule::describe() const {
  if (mode == Mode::kTheoretical)
    return "theoretical:" + textio::fmt_double(E);
  return "practical:" + textio::fmt_double(eta);
}

Run run_sgd(const problems::Suite& suite, const simplex::Mixture& alpha,
            const Eigen::VectorXd& w0, uint64_t steps, const StepSchedule& schedule,
            problems::SampleStream& stream, const Eigen::VectorXd* trace_target) {
  if (w0.size() != suite.model_dim())
    throw std::invalid_argument("run_sgd: w0 dimension mismatch");
  Run run;
  Eigen::VectorXd w = w0;
  if (trace_target) {
    run.trace.reserve(steps + 1);
    run.trace.push_back((w - *trace_target).squaredNorm());
  }
  for (uint64_t t = 0; t < steps; ++t) {
    const problems::Sample z = suite.draw_sample(alpha, stream);
    const Eigen::VectorXd g = suite.sample_grad(w, z);
    if (!g.allFinite()) throw SgdError(t, "non-finite gradient");
    w -= schedule.step(t) * g;
    if (trace_target) run.trace.push_back((w - *trace_target).squaredNorm());
  }
  run.model = problems::TrainedModel{std::move(w), steps};
  run.steps = steps;
  return run;
}

double compute_E(double kappa, double lambda_budget) {
  if (kappa < 1) throw std::invalid_argument("compute_E: kappa must be >= 1");
  if (lambda_budget <= 1)
    throw std::invalid_argument("compute_E: budget must be > 1");
  return 4096.0 * kappa * kappa * 8.0 * std::log(lambda_budget);
}

double worst_case_diameter(double d0_sq, const problems::Constants& c, double E,
                           uint64_t t) {
  const double growth = 2.0 * std::sqrt(2.0) * std::pow(c.kappa, 1.5);
  const double push = 2.0 * std::sqrt(2.0 * c.gcal) / c.mu;
  double d = std::sqrt(d0_sq);
  double peak = d;
  for (uint64_t s = 0; s < t; ++s) {
    const double inv = 1.0 / (static_cast<double>(s) + E);
    d = (1.0 + growth * inv) * d + push * inv;
    peak = std::max(peak, d);
  }
  return peak;
}

Bound concentration_bound(double d0_sq, const problems::Constants& c,
                     std::optional<double> D, uint64_t t, double lambda_budget,
                     int k) {
  if (d0_sq < 0) throw std::invalid_argument("concentration_bound: d0_sq < 0");
  if (k < 0) throw std::invalid_argument("concentration_bound: k < 0");
  if (lambda_budget < static_cast<double>(t) + 1.0)
    throw std::invalid_argument("concentration_bound: budget must be >= t + 1");
  const double E = compute_E(c.kappa, lambda_budget);
  const double diam = D ? *D : worst_case_diameter(d0_sq, c, E, t);
  if (diam < std::sqrt(d0_sq) - 1e-12)
    throw std::invalid_argument("concentration_bound: D below the initial distance");

  const double mu = c.mu, beta = c.beta, gcal = c.gcal;
  const double logl8 = 8.0 * std::log(lambda_budget);
  const double tf = static_cast<double>(t);
  const auto big_g = [&](double a, double b) {
    return std::max(E * a, 8.0 * b / (mu * mu));
  };

  Bound b;
  b.t = t;
  b.lambda_budget = lambda_budget;
  b.k = k;
  b.E = E;
  b.term_g = big_g(d0_sq, gcal) / (tf + E + 1.0);

  const double ctilde = diam * std::sqrt(8.0 * beta * beta * diam * diam + 2.0 * gcal);
  b.term_diameter = 8.0 * (tf + 1.0) * ctilde /
                    (mu * (tf + 1.0 + E) * std::pow(lambda_budget, 7.0));

  const double c1 = big_g(d0_sq, gcal) + 8.0 * ctilde / (mu * std::pow(lambda_budget, 6.0));
  const double c2 = 4.0 * std::sqrt(2.0) / mu;
  const double v0 = 8.0 * d0_sq * (4.0 * beta * beta * d0_sq + gcal) / (1.0 + E);
  const double check_c = std::max(
      {v0 / logl8,
       std::pow(32.0 * std::sqrt(2.0) * gcal / mu + 2.0 / E, 2.0),
       std::pow(64.0 * beta * beta * c1 * c1 / ((1.0 + E) * logl8) +
                    8.0 * gcal * c1 / logl8,
                2.0)});

  // Variance recursion: each round sharpens the tail exponent
  // alpha_j = 1 - 2^-j at the price of larger constants.
  double chat = check_c * logl8;  // round 0
  for (int j = 1; j <= k; ++j) {
    const double alpha_j = 1.0 - std::pow(2.0, -j);
    const double cj = 64.0 * beta * beta * c1 * c1 / std::pow(E + 1.0, 2.0 - alpha_j) +
                      64.0 * chat * c2 * c2 / (mu * mu * std::pow(E + 1.0, alpha_j)) +
                      8.0 * gcal * c1 / std::pow(E + 1.0, 1.0 - alpha_j) +
                      8.0 * (gcal / mu) * std::sqrt(chat) * c2;
    chat = std::pow(2.0, j) * cj +
           v0 * (1.0 + E) / std::pow(2.0 + E, 1.0 - alpha_j);
  }

  const double alpha_k1 = 1.0 - std::pow(2.0, -(k + 1));
  b.term_martingale = 4.0 * std::sqrt(2.0 * logl8) * std::sqrt(chat) /
                      (mu * std::pow(tf + E + 1.0, alpha_k1));
  b.total = b.term_g + b.term_diameter + b.term_martingale;
  return b;
}

double theoretical_budget(double mu, double kappa, double rho, double E,
                          double lambda_budget, double khat) {
  if (mu <= 0 || kappa < 1) throw std::invalid_argument("theoretical_budget: bad constants");
  if (rho <= 0 || rho > 1) throw std::invalid_argument("theoretical_budget: rho outside (0, 1]");
  if (E <= 0) throw std::invalid_argument("theoretical_budget: E must be > 0");
  if (lambda_budget <= 1) throw std::invalid_argument("theoretical_budget: budget must be > 1");
  if (khat < 0) throw std::invalid_argument("theoretical_budget: khat < 0");
  const double logl8 = 8.0 * std::log(lambda_budget);
  const double bracket =
      (4.0 * E + 64.0 * std::sqrt(2.0) * kappa * khat +
       16.0 * std::sqrt(E * khat) / (std::sqrt(mu) * std::pow(lambda_budget, 3.0)) +
       128.0 * kappa * std::sqrt(logl8) +
       16.0 * std::sqrt(2.0 * E * logl8) / std::sqrt(mu)) /
      (rho * std::sqrt(1.0 + E));
  return bracket * bracket - E;
}

double theoretical_budget(const problems::Constants& c, double lambda_budget,
                          double khat) {
  return theoretical_budget(c.mu, c.kappa, c.rho, compute_E(c.kappa, lambda_budget),
                            lambda_budget, khat);
}

}  // namespace mixmatch::sgd
