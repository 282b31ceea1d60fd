#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "core/baselines.hpp"
#include "core/config.hpp"
#include "core/problems.hpp"
#include "core/sgd.hpp"
#include "core/simplex.hpp"
#include "core/treesearch.hpp"

// Orchestration: suite loading, CSV ingestion, regret oracles, theorem
// verification drivers, and the multi-replica experiment runner with its CSV
// artifacts.
namespace mixmatch::harness {

using simplex::Mixture;

// Dispatches on the config's `kind` key: "synthetic" builds a generator
// suite, "ingest" runs ingest_csv. seed_override replaces the config's seed
// (experiment replicas redraw validation sets through it).
problems::Suite load_suite(const std::filesystem::path& config_path,
                           std::optional<uint64_t> seed_override = std::nullopt);

// ---------------------------------------------------------------- ingestion

struct IngestSpec {
  std::filesystem::path csv;
  std::string source_column;
  std::string label_column;
  problems::LossKind loss = problems::LossKind::kQuadratic;
  double ridge_lambda = 0.01;
  // source value -> percentages {train, validate, test, discard}, each row
  // summing to 100 within 0.01
  std::vector<std::pair<std::string, std::array<double, 4>>> splits;
  uint64_t seed = 0;
  int mc_samples = 20000;
  uint64_t optimal_model_steps = 1000000;
};

IngestSpec parse_ingest_spec(const config::Config& cfg);

struct IngestCounts {
  std::string source;
  size_t total = 0, train = 0, validate = 0, test = 0, discard = 0;
};

struct IngestReport {
  std::vector<IngestCounts> sources;  // first-appearance order
  size_t feature_dim = 0;
};

// Partitions rows by source value (sources ordered by first appearance),
// shuffles each source under a seed-derived stream, then slices by floored
// percentage counts in train/validate/test/discard order with the remainder
// rows joining train. Validation and test slices pool across sources.
// Non-numeric feature columns one-hot encode over their sorted distinct
// values; the label column must be numeric.
problems::Suite ingest_csv(const IngestSpec& spec, IngestReport* report = nullptr);

// ------------------------------------------------------------------- regret

// G(alpha) = test-distribution loss of the alpha-optimal model, its minimum
// over the simplex, and the regrets built from those. Quadratic suites get
// exact closed forms and a grid-plus-polish minimizer certified to 1e-6;
// ridge-logistic suites get long-SGD / Monte Carlo estimates (exact() false)
// with the minimum anchored at the known best mixture when one exists.
class RegretOracle {
 public:
  explicit RegretOracle(const problems::Suite& suite);

  double g_of(const Mixture& alpha) const;
  // Loss of w under the test distribution: closed form or Monte Carlo against
  // the generator when the best mixture is known, empirical test-split mean
  // otherwise.
  double test_loss(const Eigen::VectorXd& w) const;

  bool has_min() const { return has_min_; }
  double g_min() const;
  const Mixture& minimizer() const;
  bool exact() const { return exact_; }

  double simple_regret(const Mixture& alpha) const;
  // test_loss(w) - g_min; falls back to raw test_loss when no minimum is
  // available (ingested ridge-logistic).
  double model_regret(const Eigen::VectorXd& w) const;

 private:
  const problems::Suite* suite_;
  double g_min_ = 0;
  Mixture minimizer_;
  bool exact_ = true;
  bool has_min_ = true;
};

double simple_regret(const problems::Suite& suite, const Mixture& alpha);

// ------------------------------------------------------- theorem harnesses

struct SmoothnessReport {
  int pairs = 0;
  int violations_model = 0;  // |w*(a1) - w*(a2)| > (2 sigma / mu) |a1 - a2|_1
  int violations_value = 0;  // |G(a1) - G(a2)| > L |w*(a1) - w*(a2)|
  double max_ratio_model = 0;  // largest LHS/RHS seen (0 when both sides 0)
  double max_ratio_value = 0;
  bool pass() const { return violations_model == 0 && violations_value == 0; }
};

// Random mixture pairs, uniform on the simplex. Quadratic suites only.
SmoothnessReport verify_smoothness(const problems::Suite& suite, int pairs,
                                   uint64_t seed);

struct ConcentrationPoint {
  uint64_t t = 0;
  double mean_dsq = 0;
  double median_dsq = 0;
  double p99_dsq = 0;
  double bound_term_g = 0;
  double bound_term_diameter = 0;
  double bound_term_martingale = 0;
  double bound_total = 0;
  uint64_t violations = 0;  // replicas with d_t^2 above bound_total
  double allowed_rate = 0;  // (t+1)/Lambda^8 plus 3-sigma binomial slack
  bool ok = true;
};

struct ConcentrationReport {
  std::vector<ConcentrationPoint> points;
  int replicas = 0;
  double schedule_E = 0;  // offset the runs used (the bound keeps its own)
  bool pass = true;
};

struct ConcentrationOptions {
  uint64_t t_max = 100000;
  double lambda_budget = 100001;  // must be >= t_max + 1
  int replicas = 200;
  int k = 0;
  uint64_t seed = 0;
  std::optional<double> schedule_E;  // default: the bound's own offset
  std::optional<double> diameter;    // forwarded to the bound
  std::vector<uint64_t> grid;        // default: geometric, t_max appended
};

// Traced SGD replicas on the suite's best mixture (uniform when unknown)
// against the concentration bound at each grid t. Quadratic suites only.
ConcentrationReport verify_concentration(const problems::Suite& suite,
                                         const ConcentrationOptions& opt);

// -------------------------------------------------------------- experiments

struct ExperimentConfig {
  std::filesystem::path suite_config;
  std::vector<std::string> algorithms;  // mixmatch, mixmatch+0.1step, genie,
                                        // uniform, validation, only:<i>
  std::vector<uint64_t> lambdas;
  int replicas = 10;
  uint64_t master_seed = 0;
  uint64_t node_steps = 500;
  simplex::PartitionStrategy strategy;
  std::string schedule_spec = "practical:0.05";
  std::optional<double> nu2, rho2;  // default: suite constants
  bool widen_final_pool = false;
  int threads = 0;  // 0: hardware concurrency
};

ExperimentConfig parse_experiment_config(const config::Config& cfg);

struct CellResult {
  std::string algorithm;
  uint64_t lambda = 0;
  int replica = 0;
  double regret = 0;
  int h_final = 0;
  uint64_t total_steps = 0;
  bool failed = false;
  std::string error;
};

struct ExperimentReport {
  std::vector<CellResult> cells;  // sorted by (algorithm, lambda, replica)
};

// Runs every (algorithm, lambda, replica) cell on a work queue and writes
// regret_curve.csv, summary.csv, and errors.csv under out_dir. Replica i of
// every cell shares one suite draw (seed from (master_seed, i)); an
// algorithm's stream seed comes from (master_seed, algorithm, i) with the
// budget deliberately excluded so larger budgets extend the same search
// trajectory. Failed cells land in errors.csv instead of aborting the run.
ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const std::filesystem::path& out_dir);

// ------------------------------------------------------------ CSV artifacts

void write_search_csv(const treesearch::Result& result,
                      const std::filesystem::path& path);
void write_result_csv(const std::string& alpha_field, int height,
                      uint64_t total_steps, std::optional<double> regret,
                      const std::filesystem::path& path);
void write_smoothness_csv(const SmoothnessReport& report,
                          const std::filesystem::path& path);
void write_concentration_csv(const ConcentrationReport& report,
                             const std::filesystem::path& path);
void write_partition_demo_csv(int k, int height,
                              const simplex::PartitionStrategy& strategy,
                              const std::filesystem::path& path);
void write_ingest_counts_csv(const IngestReport& report,
                             const std::filesystem::path& path);

std::string mixture_json(const Mixture& alpha);

}  // namespace mixmatch::harness
