#include "core/baselines.hpp"

#include <stdexcept>

#include "core/rng.hpp"

namespace mixmatch::baselines {

BaselineKind BaselineKind::parse(const std::string& text) {
  BaselineKind k;
  if (text == "genie") {
    k.kind = Kind::kGenie;
  } else if (text == "uniform") {
    k.kind = Kind::kUniform;
  } else if (text == "validation") {
    k.kind = Kind::kValidation;
  } else if (text.rfind("only:", 0) == 0) {
    k.kind = Kind::kOnlySource;
    k.source_index = std::stoi(text.substr(5));
  } else {
    throw std::invalid_argument("unknown baseline '" + text + "'");
  }
  return k;
}

std::string BaselineKind::describe() const {
  switch (kind) {
    case Kind::kGenie:
      return "genie";
    case Kind::kUniform:
      return "uniform";
    case Kind::kValidation:
      return "validation";
    case Kind::kOnlySource:
      return "only:" + std::to_string(source_index);
  }
  return "?";
}

BaselineResult run_baseline(const BaselineKind& kind, const problems::Suite& suite,
                            uint64_t budget, const sgd::StepSchedule& schedule,
                            uint64_t seed) {
  if (budget < 1) throw std::invalid_argument("baseline: budget must be >= 1");
  const int k = suite.num_sources();

  BaselineResult res;
  res.tag = kind.describe();
  res.total_steps = budget;

  if (kind.kind == BaselineKind::Kind::kValidation) {
    const auto& rows = suite.validation_set();
    if (rows.empty())
      throw std::invalid_argument("baseline: validation set is empty");
    rng::Stream stream(seed);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(suite.model_dim());
    for (uint64_t t = 0; t < budget; ++t) {
      const problems::Sample& z = rows[stream.next_below(rows.size())];
      const Eigen::VectorXd g = suite.sample_grad(w, z);
      if (!g.allFinite()) throw sgd::SgdError(t, "non-finite gradient");
      w -= schedule.step(t) * g;
    }
    res.model = problems::TrainedModel{std::move(w), budget};
    return res;
  }

  simplex::Mixture alpha;
  switch (kind.kind) {
    case BaselineKind::Kind::kGenie:
      if (!suite.has_alpha_star())
        throw std::invalid_argument("baseline: genie needs a known best mixture");
      alpha = suite.alpha_star();
      break;
    case BaselineKind::Kind::kUniform:
      alpha.assign(k, 1.0 / k);
      break;
    case BaselineKind::Kind::kOnlySource: {
      if (kind.source_index < 1 || kind.source_index > k)
        throw std::invalid_argument("baseline: source index out of range");
      alpha.assign(k, 0.0);
      alpha[kind.source_index - 1] = 1.0;
      break;
    }
    default:
      throw std::logic_error("unreachable");
  }

  problems::SampleStream stream(seed);
  sgd::Run run = sgd::run_sgd(suite, alpha, Eigen::VectorXd::Zero(suite.model_dim()),
                              budget, schedule, stream);
  res.alpha = std::move(alpha);
  res.model = std::move(run.model);
  return res;
}

}  // namespace mixmatch::baselines
