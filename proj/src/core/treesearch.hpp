#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "core/problems.hpp"
#include "core/sgd.hpp"
#include "core/simplex.hpp"

// Optimistic tree search over the mixture simplex: repeatedly expand the
// leaf with the smallest bias-corrected validation loss (b-value), training
// each new child with warm-started SGD at its cell representative.
namespace mixmatch::treesearch {

// val_loss - 2 nu2 rho2^h. The subtracted term dominates the cell's possible
// improvement at height h, so this lower-bounds the node's achievable loss.
double b_value(double val_loss, double nu2, double rho2, int h);

struct Node {
  simplex::Cell cell;
  simplex::Mixture rep;          // representative(cell), the trained mixture
  Eigen::VectorXd init_model;    // SGD start; equals parent's final iterate
  problems::TrainedModel model;  // final iterate
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double b_value = std::numeric_limits<double>::quiet_NaN();
  uint64_t steps_spent = 0;
  int parent = -1;      // arena ids, -1 when absent
  int child_left = -1;  // cell index 2i-1
  int child_right = -1;

  bool is_leaf() const { return child_left < 0; }
};

// One line per evaluated node, in evaluation order (order is 1-based).
struct AuditRow {
  uint64_t order = 0;
  int height = 0;
  simplex::BigIndex index;
  simplex::Mixture alpha;
  uint64_t steps = 0;
  double val_loss = 0;
  double b_value = 0;
};

struct Params {
  uint64_t budget = 0;                      // total SGD step budget
  std::function<uint64_t(int)> node_steps;  // per-child steps by height, >= 1
  simplex::PartitionStrategy strategy;
  sgd::StepSchedule schedule;
  double nu2 = 0;
  double rho2 = 0;
  std::optional<Eigen::VectorXd> w0;  // root model; default zero vector
  uint64_t seed = 0;
  // Final argmin pool: nodes at the final height (default) or every leaf.
  bool widen_final_pool = false;
};

struct Result {
  simplex::Mixture alpha;
  problems::TrainedModel model;
  int height_final = 0;
  uint64_t total_steps = 0;
  size_t node_count = 0;
  int chosen_node = -1;
  std::vector<AuditRow> audit;
  std::vector<Node> nodes;  // arena; root at id 0
};

// Min-b leaf of the arena, ties broken by smaller height then smaller cell
// index. Rejects an arena without leaves.
int select_leaf(const std::vector<Node>& nodes);

// Search tree with explicit expansion control; mix_and_match drives one, and
// tests drive it directly. The root holds the start model untrained.
class Tree {
 public:
  Tree(const problems::Suite& suite, const Params& params);

  // Splits leaf `node_id` and trains both children for `steps` SGD steps
  // each, warm-started from the node's model. Returns the child ids, lower
  // cell index first. Rejects non-leaves and steps == 0.
  std::pair<int, int> expand(int node_id, uint64_t steps);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<AuditRow>& audit() const { return audit_; }
  uint64_t total_steps() const { return total_steps_; }
  int max_height() const;

 private:
  int eval_child(simplex::Cell cell, int parent_id, uint64_t steps);

  const problems::Suite* suite_;
  Params params_;
  std::vector<Node> nodes_;
  std::vector<AuditRow> audit_;
  uint64_t total_steps_ = 0;
};

// Expands the root (cost 2 node_steps(0)), then repeatedly expands the min-b
// leaf at cost 2 node_steps(h+1) while the spent total is within budget; the
// loop check runs before each expansion, so the last one may overshoot by its
// own cost. Returns the least-validation-loss node at the final height.
// Requires budget >= 2 node_steps(0). A one-source suite cannot split: the
// root is trained node_steps(0) steps and returned as is.
Result mix_and_match(const problems::Suite& suite, const Params& params);

inline std::function<uint64_t(int)> constant_steps(uint64_t lambda) {
  return [lambda](int) { return lambda; };
}

}  // namespace mixmatch::treesearch
