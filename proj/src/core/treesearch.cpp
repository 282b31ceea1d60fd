#include "core/treesearch.hpp"

#include <cmath>
#include <stdexcept>

#include "core/rng.hpp"

namespace mixmatch::treesearch {

double b_value(double val_loss, double nu2, double rho2, int h) {
  return val_loss - 2.0 * nu2 * std::pow(rho2, h);
}

int select_leaf(const std::vector<Node>& nodes) {
  int best = -1;
  for (int id = 0; id < static_cast<int>(nodes.size()); ++id) {
    const Node& n = nodes[id];
    if (!n.is_leaf()) continue;
    if (best < 0) {
      best = id;
      continue;
    }
    const Node& b = nodes[best];
    if (n.b_value < b.b_value ||
        (n.b_value == b.b_value &&
         (n.cell.height < b.cell.height ||
          (n.cell.height == b.cell.height && n.cell.index < b.cell.index))))
      best = id;
  }
  if (best < 0) throw std::invalid_argument("select_leaf: no leaves");
  return best;
}

namespace {

void check_params(const problems::Suite& suite, const Params& params) {
  if (!params.node_steps)
    throw std::invalid_argument("search: node_steps function is required");
  const uint64_t root_steps = params.node_steps(0);
  if (root_steps < 1)
    throw std::invalid_argument("search: node_steps(0) must be >= 1");
  if (params.budget < 2 * root_steps)
    throw std::invalid_argument("search: budget below the root expansion cost");
  if (suite.num_sources() >= 2) {
    if (!(params.nu2 > 0))
      throw std::invalid_argument("search: nu2 must be > 0");
    if (!(params.rho2 > 0 && params.rho2 < 1))
      throw std::invalid_argument("search: rho2 must lie in (0, 1)");
  }
  if (params.w0 && params.w0->size() != suite.model_dim())
    throw std::invalid_argument("search: w0 dimension mismatch");
}

uint64_t node_stream_key(uint64_t seed, int height, const simplex::BigIndex& index) {
  return rng::derive(
      rng::derive(rng::derive(seed, rng::kSaltNodeEval), static_cast<uint64_t>(height)),
      simplex::hash_index(index));
}

}  // namespace

Tree::Tree(const problems::Suite& suite, const Params& params)
    : suite_(&suite), params_(params) {
  check_params(suite, params);
  Node root;
  root.cell = simplex::root_cell(suite.num_sources());
  root.rep = simplex::representative(root.cell);
  root.init_model = params_.w0 ? *params_.w0
                               : Eigen::VectorXd::Zero(suite.model_dim()).eval();
  root.model = problems::TrainedModel{root.init_model, 0};
  nodes_.push_back(std::move(root));
}

int Tree::eval_child(simplex::Cell cell, int parent_id, uint64_t steps) {
  Node n;
  n.cell = std::move(cell);
  n.rep = simplex::representative(n.cell);
  n.init_model = nodes_[parent_id].model.w;
  problems::SampleStream stream(
      node_stream_key(params_.seed, n.cell.height, n.cell.index));
  sgd::Run run = sgd::run_sgd(*suite_, n.rep, n.init_model, steps,
                              params_.schedule, stream);
  n.model = std::move(run.model);
  n.val_loss = suite_->validation_loss(n.model);
  n.b_value = treesearch::b_value(n.val_loss, params_.nu2, params_.rho2,
                                  n.cell.height);
  n.steps_spent = steps;
  n.parent = parent_id;
  const int id = static_cast<int>(nodes_.size());
  audit_.push_back(AuditRow{audit_.size() + 1, n.cell.height, n.cell.index,
                            n.rep, steps, n.val_loss, n.b_value});
  total_steps_ += steps;
  nodes_.push_back(std::move(n));
  return id;
}

std::pair<int, int> Tree::expand(int node_id, uint64_t steps) {
  if (node_id < 0 || node_id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("expand: node id out of range");
  if (!nodes_[node_id].is_leaf())
    throw std::invalid_argument("expand: node already expanded");
  if (steps < 1) throw std::invalid_argument("expand: steps must be >= 1");
  auto children = simplex::split_cell(nodes_[node_id].cell, params_.strategy);
  const int left = eval_child(std::move(children.first), node_id, steps);
  const int right = eval_child(std::move(children.second), node_id, steps);
  nodes_[node_id].child_left = left;
  nodes_[node_id].child_right = right;
  return {left, right};
}

int Tree::max_height() const {
  int h = 0;
  for (const Node& n : nodes_) h = std::max(h, n.cell.height);
  return h;
}

Result mix_and_match(const problems::Suite& suite, const Params& params) {
  check_params(suite, params);

  if (suite.num_sources() == 1) {
    // One-point simplex: nothing to search, just train the root mixture.
    Node root;
    root.cell = simplex::root_cell(1);
    root.rep = simplex::representative(root.cell);
    root.init_model = params.w0 ? *params.w0
                                : Eigen::VectorXd::Zero(suite.model_dim()).eval();
    const uint64_t steps = params.node_steps(0);
    problems::SampleStream stream(node_stream_key(params.seed, 0, root.cell.index));
    sgd::Run run = sgd::run_sgd(suite, root.rep, root.init_model, steps,
                                params.schedule, stream);
    root.model = std::move(run.model);
    root.val_loss = suite.validation_loss(root.model);
    root.b_value = b_value(root.val_loss, params.nu2, params.rho2, 0);
    root.steps_spent = steps;

    Result res;
    res.alpha = root.rep;
    res.model = root.model;
    res.height_final = 0;
    res.total_steps = steps;
    res.node_count = 1;
    res.chosen_node = 0;
    res.audit.push_back(AuditRow{1, 0, root.cell.index, root.rep, steps,
                                 root.val_loss, root.b_value});
    res.nodes.push_back(std::move(root));
    return res;
  }

  Tree tree(suite, params);
  tree.expand(0, params.node_steps(0));
  while (tree.total_steps() <= params.budget) {
    const int leaf = select_leaf(tree.nodes());
    const int h = tree.nodes()[leaf].cell.height;
    tree.expand(leaf, params.node_steps(h + 1));
  }

  const int h_final = tree.max_height();
  int chosen = -1;
  for (int id = 0; id < static_cast<int>(tree.nodes().size()); ++id) {
    const Node& n = tree.nodes()[id];
    const bool eligible = params.widen_final_pool
                              ? n.is_leaf()
                              : n.cell.height == h_final;
    if (!eligible || n.steps_spent == 0) continue;
    if (chosen < 0) {
      chosen = id;
      continue;
    }
    const Node& c = tree.nodes()[chosen];
    if (n.val_loss < c.val_loss ||
        (n.val_loss == c.val_loss && n.cell.index < c.cell.index))
      chosen = id;
  }

  Result res;
  res.alpha = tree.nodes()[chosen].rep;
  res.model = tree.nodes()[chosen].model;
  res.height_final = h_final;
  res.total_steps = tree.total_steps();
  res.node_count = tree.nodes().size();
  res.chosen_node = chosen;
  res.audit = tree.audit();
  res.nodes = tree.nodes();
  return res;
}

}  // namespace mixmatch::treesearch
