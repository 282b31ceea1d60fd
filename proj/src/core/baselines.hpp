#pragma once

#include <cstdint>
#include <string>

#include "core/problems.hpp"
#include "core/sgd.hpp"
#include "core/simplex.hpp"

// Reference training policies the search is compared against: fixed-mixture
// SGD (genie / uniform / single source) and SGD over the validation rows.
namespace mixmatch::baselines {

struct BaselineKind {
  enum class Kind { kGenie, kUniform, kValidation, kOnlySource };
  Kind kind = Kind::kUniform;
  int source_index = 0;  // 1-based, only-source

  // "genie" | "uniform" | "validation" | "only:<i>"
  static BaselineKind parse(const std::string& text);
  std::string describe() const;
};

struct BaselineResult {
  std::string tag;
  simplex::Mixture alpha;  // empty for the validation policy
  problems::TrainedModel model;
  uint64_t total_steps = 0;
};

// Exactly `budget` SGD steps from the zero vector. Fixed-mixture policies
// draw through the suite's mixture oracle with stream key = seed, so
// only-source i replays draw_from_source(i) under the same key. The
// validation policy draws rows uniformly with replacement from the
// validation set and never touches the training oracle.
BaselineResult run_baseline(const BaselineKind& kind, const problems::Suite& suite,
                            uint64_t budget, const sgd::StepSchedule& schedule,
                            uint64_t seed);

}  // namespace mixmatch::baselines
