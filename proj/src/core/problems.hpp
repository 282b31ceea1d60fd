#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/config.hpp"
#include "core/rng.hpp"
#include "core/simplex.hpp"

// Training-source suites: K sources over observed features x (plus a latent
// u that never crosses the oracle boundary), a shared label conditional, a
// finite validation set drawn from the alpha* mixture, and the smoothness /
// noise constants the search consumes.
namespace mixmatch::problems {

using simplex::Mixture;

struct Sample {
  Eigen::VectorXd x;
  double y = 0;
};

enum class LossKind { kQuadratic, kRidgeLogistic };

LossKind parse_loss_kind(const std::string& name);  // "quadratic"|"ridge-logistic"

struct Constants {
  double mu = 0, beta = 0, L = 0, gcal = 0, sigma = 0, kappa = 0;
  double nu1 = 0, nu2 = 0, rho = 0, rho2 = 0;
  bool conservative = false;  // analytic over-estimates (ridge-logistic)
};

struct LossEstimate {
  double value = 0;
  bool exact = false;
};

struct ModelEstimate {
  Eigen::VectorXd w;
  bool exact = false;
};

// Models acquire sgd_steps by running SGD; the validation oracle refuses
// models that never took a step.
struct TrainedModel {
  Eigen::VectorXd w;
  uint64_t sgd_steps = 0;
};

// p(y | x, u), shared across sources by construction (one object, one
// shared_ptr). binarize emits sign(g + noise) in {-1, +1}.
struct Conditional {
  Eigen::VectorXd coef_x, coef_u;
  double bias = 0;
  double noise_std = 0;
  bool binarize = false;

  double draw_y(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                rng::Stream& stream) const;
};

// A consumer-owned position in the suite's sample space. Draw j of a stream
// with key k is a pure function of (k, j) regardless of the mixture queried,
// so a degenerate mixture e_i replays source i's stream exactly.
class SampleStream {
 public:
  explicit SampleStream(uint64_t key) : key_(key) {}

 private:
  friend class Suite;
  uint64_t key_;
  uint64_t n_ = 0;
};

struct SyntheticSource {
  Eigen::VectorXd mean;  // over (x, u), x first
  Eigen::MatrixXd cov;   // PSD, (d+du) x (d+du)
};

struct SyntheticConfig {
  int x_dim = 1;
  int u_dim = 0;
  LossKind loss = LossKind::kQuadratic;
  double ridge_lambda = 0.01;
  std::vector<SyntheticSource> sources;
  Conditional conditional;
  Mixture alpha_star;
  int validation_size = 0;
  uint64_t seed = 0;
  int mc_samples = 20000;               // ridge-logistic averaged_loss
  uint64_t optimal_model_steps = 1000000;  // ridge-logistic optimal_model
};

class Suite {
 public:
  static Suite synthetic(const SyntheticConfig& cfg);
  // Synthetic suites only; harness::load_suite also understands kind=ingest.
  // seed_override replaces the config's seed key (replica redraws).
  static Suite from_config(const config::Config& cfg,
                           std::optional<uint64_t> seed_override = std::nullopt);
  static Suite from_config_file(const std::filesystem::path& path);
  static Suite ingested(std::vector<std::vector<Sample>> train_by_source,
                        std::vector<Sample> validation, std::vector<Sample> test,
                        LossKind loss, double ridge_lambda, int mc_samples,
                        uint64_t optimal_model_steps);

  int num_sources() const { return static_cast<int>(k_); }
  int x_dim() const { return x_dim_; }
  int model_dim() const { return x_dim_; }
  LossKind loss() const { return loss_; }
  double ridge_lambda() const { return ridge_lambda_; }
  bool is_synthetic() const { return synthetic_; }
  uint64_t seed() const { return seed_; }
  uint64_t optimal_model_steps() const { return optimal_model_steps_; }
  bool has_alpha_star() const { return alpha_star_.has_value(); }
  const Mixture& alpha_star() const;
  const Constants& constants() const { return constants_; }

  // Training oracles. draw_sample: multinomial source index, then that
  // source's draw; counted against training_draws().
  Sample draw_from_source(int source, SampleStream& stream) const;
  Sample draw_sample(const Mixture& alpha, SampleStream& stream) const;

  double sample_loss(const Eigen::VectorXd& w, const Sample& z) const;
  Eigen::VectorXd sample_grad(const Eigen::VectorXd& w, const Sample& z) const;

  // Closed form for quadratic; Monte Carlo (exact = false) for
  // ridge-logistic, deterministic in (alpha, w).
  LossEstimate averaged_loss(const Mixture& alpha, const Eigen::VectorXd& w) const;

  // Empirical mean over the full validation set, fixed order. Refuses
  // untrained models; the _unchecked form is the verification-harness bypass.
  double validation_loss(const TrainedModel& model) const;
  double validation_loss_unchecked(const Eigen::VectorXd& w) const;

  ModelEstimate optimal_model(const Mixture& alpha) const;

  // Mixture embedding moments (exact; empirical moments for ingested data).
  Eigen::VectorXd mixture_mean(const Mixture& alpha) const;
  double mixture_trace_cov(const Mixture& alpha) const;

  const std::vector<Sample>& validation_set() const { return validation_; }
  const std::vector<Sample>& test_set() const { return test_; }

  uint64_t training_draws() const { return counters_->training_draws.load(); }
  uint64_t validation_queries() const { return counters_->validation_queries.load(); }

  // Identity of the shared conditional (synthetic suites; null otherwise).
  const Conditional* source_conditional(int source) const;

  // One-row CSV: mu,beta,L,gcal,sigma,nu1,nu2,rho,rho2.
  void write_manifest(const std::filesystem::path& csv_path) const;

  // Key of the stream that generated the validation set: derive(seed,
  // kSaltValidation). Fixed so tests can replay it.
  static uint64_t validation_stream_key(uint64_t suite_seed);

 private:
  Suite() = default;
  void check_alpha(const Mixture& alpha) const;
  Sample source_body(int source, uint64_t draw_key) const;
  Sample mixture_draw_uncounted(const Mixture& alpha, uint64_t draw_key) const;
  void finish_construction();  // moments, constants, validation moments

  struct SourceState {
    // synthetic
    Eigen::VectorXd mean_joint;
    Eigen::MatrixXd factor;  // factor * factor^T = cov
    std::shared_ptr<const Conditional> conditional;
    // ingested
    std::vector<Sample> rows;
    // shared moments of the x marginal
    Eigen::VectorXd mean_x;
    double trace_cov_x = 0;
  };

  // Counters sit behind a pointer so the suite stays movable; they are
  // observability state, not logical state, hence mutable-through-const.
  struct Counters {
    std::atomic<uint64_t> training_draws{0};
    std::atomic<uint64_t> validation_queries{0};
  };

  bool synthetic_ = true;
  size_t k_ = 0;
  int x_dim_ = 0;
  int u_dim_ = 0;
  LossKind loss_ = LossKind::kQuadratic;
  double ridge_lambda_ = 0;
  int mc_samples_ = 20000;
  uint64_t optimal_model_steps_ = 1000000;
  uint64_t seed_ = 0;
  std::vector<SourceState> sources_;
  std::optional<Mixture> alpha_star_;
  std::vector<Sample> validation_;
  std::vector<Sample> test_;
  Constants constants_;
  std::unique_ptr<Counters> counters_ = std::make_unique<Counters>();
};

}  // namespace mixmatch::problems
