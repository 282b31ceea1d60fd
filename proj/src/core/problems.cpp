#include "core/problems.hpp"

#include <cmath>
#include <stdexcept>

#include "core/textio.hpp"

namespace mixmatch::problems {
namespace {

// log(1 + exp(v)) without overflow.
double log1pexp(double v) {
  if (v > 0) return v + std::log1p(std::exp(-v));
  return std::log1p(std::exp(v));
}

std::vector<double> parse_nums(const std::string& text, const std::string& what) {
  std::vector<double> out;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    if (i >= text.size()) break;
    size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t') ++j;
    try {
      size_t used = 0;
      const std::string tok = text.substr(i, j - i);
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw std::invalid_argument(what + ": not a number: '" +
                                  text.substr(i, j - i) + "'");
    }
    i = j;
  }
  return out;
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols())
    throw std::invalid_argument("covariance must be square");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-9 * scale)
      throw std::invalid_argument("covariance is not positive semidefinite");
    if (ev[i] < 0) ev[i] = 0;
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

}  // namespace

LossKind parse_loss_kind(const std::string& name) {
  if (name == "quadratic") return LossKind::kQuadratic;
  if (name == "ridge-logistic") return LossKind::kRidgeLogistic;
  throw std::invalid_argument("unknown loss '" + name + "'");
}

double Conditional::draw_y(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           rng::Stream& stream) const {
  double g = bias + coef_x.dot(x);
  if (coef_u.size() > 0) g += coef_u.dot(u);
  if (noise_std > 0) g += noise_std * stream.next_normal();
  if (binarize) return g >= 0 ? 1.0 : -1.0;
  return g;
}

uint64_t Suite::validation_stream_key(uint64_t suite_seed) {
  return rng::derive(suite_seed, rng::kSaltValidation);
}

const Mixture& Suite::alpha_star() const {
  if (!alpha_star_) throw std::logic_error("suite has no alpha_star");
  return *alpha_star_;
}

void Suite::check_alpha(const Mixture& alpha) const {
  if (alpha.size() != k_)
    throw std::invalid_argument("mixture has " + std::to_string(alpha.size()) +
                                " weights, suite has " + std::to_string(k_) +
                                " sources");
}

Sample Suite::source_body(int source, uint64_t draw_key) const {
  const SourceState& src = sources_[static_cast<size_t>(source)];
  rng::Stream body(rng::derive(draw_key, rng::kSaltSourceBody));
  if (!synthetic_) {
    return src.rows[body.next_below(src.rows.size())];
  }
  Eigen::VectorXd xi(src.mean_joint.size());
  for (int i = 0; i < xi.size(); ++i) xi[i] = body.next_normal();
  const Eigen::VectorXd joint = src.mean_joint + src.factor * xi;
  Sample z;
  z.x = joint.head(x_dim_);
  const Eigen::VectorXd u = joint.tail(u_dim_);
  z.y = src.conditional->draw_y(z.x, u, body);
  return z;
}

Sample Suite::mixture_draw_uncounted(const Mixture& alpha, uint64_t draw_key) const {
  rng::Stream pick(rng::derive(draw_key, rng::kSaltSourceIndex));
  const double u = pick.next_unit_co();
  double acc = 0;
  int source = static_cast<int>(k_) - 1;
  for (size_t i = 0; i < k_; ++i) {
    acc += alpha[i];
    if (u < acc) {
      source = static_cast<int>(i);
      break;
    }
  }
  return source_body(source, draw_key);
}

Sample Suite::draw_from_source(int source, SampleStream& stream) const {
  if (source < 0 || static_cast<size_t>(source) >= k_)
    throw std::invalid_argument("source index out of range");
  const uint64_t draw_key = rng::derive(stream.key_, stream.n_++);
  counters_->training_draws.fetch_add(1, std::memory_order_relaxed);
  return source_body(source, draw_key);
}

Sample Suite::draw_sample(const Mixture& alpha, SampleStream& stream) const {
  check_alpha(alpha);
  const uint64_t draw_key = rng::derive(stream.key_, stream.n_++);
  counters_->training_draws.fetch_add(1, std::memory_order_relaxed);
  return mixture_draw_uncounted(alpha, draw_key);
}

double Suite::sample_loss(const Eigen::VectorXd& w, const Sample& z) const {
  if (w.size() != x_dim_) throw std::invalid_argument("model dimension mismatch");
  if (loss_ == LossKind::kQuadratic) return 0.5 * (w - z.x).squaredNorm();
  return log1pexp(-z.y * w.dot(z.x)) + 0.5 * ridge_lambda_ * w.squaredNorm();
}

Eigen::VectorXd Suite::sample_grad(const Eigen::VectorXd& w, const Sample& z) const {
  if (w.size() != x_dim_) throw std::invalid_argument("model dimension mismatch");
  if (loss_ == LossKind::kQuadratic) return w - z.x;
  const double margin = z.y * w.dot(z.x);
  const double s = 1.0 / (1.0 + std::exp(margin));  // sigmoid(-margin)
  return (-z.y * s) * z.x + ridge_lambda_ * w;
}

Eigen::VectorXd Suite::mixture_mean(const Mixture& alpha) const {
  check_alpha(alpha);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(x_dim_);
  for (size_t i = 0; i < k_; ++i) m += alpha[i] * sources_[i].mean_x;
  return m;
}

double Suite::mixture_trace_cov(const Mixture& alpha) const {
  check_alpha(alpha);
  // Within-source traces plus between-source spread:
  // sum_i a_i (tr S_i + |m_i|^2) - |m(alpha)|^2.
  double second = 0;
  for (size_t i = 0; i < k_; ++i)
    second += alpha[i] * (sources_[i].trace_cov_x + sources_[i].mean_x.squaredNorm());
  return second - mixture_mean(alpha).squaredNorm();
}

LossEstimate Suite::averaged_loss(const Mixture& alpha, const Eigen::VectorXd& w) const {
  check_alpha(alpha);
  if (w.size() != x_dim_) throw std::invalid_argument("model dimension mismatch");
  if (loss_ == LossKind::kQuadratic) {
    const double v =
        0.5 * (w - mixture_mean(alpha)).squaredNorm() + 0.5 * mixture_trace_cov(alpha);
    return {v, true};
  }
  const uint64_t mc_key = rng::derive(seed_, rng::kSaltMonteCarlo);
  double acc = 0;
  for (int j = 0; j < mc_samples_; ++j) {
    const Sample z = mixture_draw_uncounted(alpha, rng::derive(mc_key, j));
    acc += sample_loss(w, z);
  }
  return {acc / mc_samples_, false};
}

double Suite::validation_loss(const TrainedModel& model) const {
  if (model.sgd_steps == 0)
    throw std::logic_error("validation loss queried on an untrained model");
  return validation_loss_unchecked(model.w);
}

double Suite::validation_loss_unchecked(const Eigen::VectorXd& w) const {
  counters_->validation_queries.fetch_add(1, std::memory_order_relaxed);
  double acc = 0;
  for (const Sample& z : validation_) acc += sample_loss(w, z);
  return acc / static_cast<double>(validation_.size());
}

ModelEstimate Suite::optimal_model(const Mixture& alpha) const {
  check_alpha(alpha);
  if (loss_ == LossKind::kQuadratic) return {mixture_mean(alpha), true};
  // Long decaying-step SGD; deterministic, outside the draw counters.
  const uint64_t key = rng::derive(seed_, rng::kSaltOptModel);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(x_dim_);
  const double mu = constants_.mu;
  for (uint64_t t = 0; t < optimal_model_steps_; ++t) {
    const Sample z = mixture_draw_uncounted(alpha, rng::derive(key, t));
    w -= (2.0 / (mu * (static_cast<double>(t) + 100.0))) * sample_grad(w, z);
  }
  return {w, false};
}

const Conditional* Suite::source_conditional(int source) const {
  if (source < 0 || static_cast<size_t>(source) >= k_)
    throw std::invalid_argument("source index out of range");
  return sources_[static_cast<size_t>(source)].conditional.get();
}

void Suite::finish_construction() {
  // x-marginal moments per source.
  for (SourceState& src : sources_) {
    if (synthetic_) {
      src.mean_x = src.mean_joint.head(x_dim_);
      const Eigen::MatrixXd cov = src.factor * src.factor.transpose();
      src.trace_cov_x = cov.topLeftCorner(x_dim_, x_dim_).trace();
    } else {
      Eigen::VectorXd m = Eigen::VectorXd::Zero(x_dim_);
      double second = 0;
      for (const Sample& z : src.rows) {
        m += z.x;
        second += z.x.squaredNorm();
      }
      const double n = static_cast<double>(src.rows.size());
      src.mean_x = m / n;
      src.trace_cov_x = second / n - src.mean_x.squaredNorm();
    }
  }

  double spread = 0;  // max pairwise distance between source means
  for (size_t a = 0; a + 1 < k_; ++a)
    for (size_t b = a + 1; b < k_; ++b)
      spread = std::max(spread, (sources_[a].mean_x - sources_[b].mean_x).norm());

  Constants c;
  if (loss_ == LossKind::kQuadratic) {
    double max_trace = 0;
    for (const SourceState& src : sources_)
      max_trace = std::max(max_trace, src.trace_cov_x);
    c.mu = c.beta = c.kappa = 1;
    c.gcal = max_trace + spread * spread;
    c.L = spread + std::sqrt(c.gcal);
    c.sigma = std::sqrt(spread * spread + c.gcal);
    c.conservative = false;
  } else {
    // Data-norm envelope: exact max for finite sources, 6-sigma quantile
    // bound for Gaussian ones.
    double xmax = 0;
    for (const SourceState& src : sources_) {
      if (synthetic_) {
        xmax = std::max(xmax, src.mean_x.norm() + 6.0 * std::sqrt(src.trace_cov_x));
      } else {
        for (const Sample& z : src.rows) xmax = std::max(xmax, z.x.norm());
      }
    }
    for (const Sample& z : validation_) xmax = std::max(xmax, z.x.norm());
    c.mu = ridge_lambda_;
    c.beta = xmax * xmax / 4.0 + ridge_lambda_;
    c.kappa = c.beta / c.mu;
    c.gcal = 4.0 * xmax * xmax;
    const double diam = 2.0 * xmax / ridge_lambda_;  // stationarity: |w*| <= xmax/mu
    c.L = 3.0 * xmax;
    c.sigma = std::sqrt(c.beta * c.beta * diam * diam + c.gcal);
    c.conservative = true;
  }
  c.nu1 = 32.0 * static_cast<double>(k_) * c.sigma * c.sigma / (3.0 * c.mu * c.mu);
  c.rho = k_ >= 2 ? std::pow(std::sqrt(3.0) / 2.0, 2.0 / (static_cast<double>(k_) - 1))
                  : 0.0;
  c.nu2 = c.L * std::sqrt(c.nu1);
  c.rho2 = std::sqrt(c.rho);
  constants_ = c;
}

Suite Suite::synthetic(const SyntheticConfig& cfg) {
  if (cfg.x_dim < 1) throw std::invalid_argument("x_dim must be >= 1");
  if (cfg.u_dim < 0) throw std::invalid_argument("u_dim must be >= 0");
  if (cfg.sources.empty()) throw std::invalid_argument("suite needs >= 1 source");
  if (cfg.validation_size < 1)
    throw std::invalid_argument("validation_size must be >= 1");
  if (cfg.mc_samples < 1) throw std::invalid_argument("mc_samples must be >= 1");
  if (cfg.loss == LossKind::kRidgeLogistic) {
    if (cfg.ridge_lambda <= 0)
      throw std::invalid_argument("ridge-logistic needs ridge_lambda > 0");
    if (!cfg.conditional.binarize)
      throw std::invalid_argument("ridge-logistic needs a binarized conditional");
  }
  const int joint = cfg.x_dim + cfg.u_dim;
  if (cfg.conditional.coef_x.size() != cfg.x_dim ||
      cfg.conditional.coef_u.size() != cfg.u_dim)
    throw std::invalid_argument("conditional coefficient dimensions mismatch");

  Suite s;
  s.synthetic_ = true;
  s.k_ = cfg.sources.size();
  s.x_dim_ = cfg.x_dim;
  s.u_dim_ = cfg.u_dim;
  s.loss_ = cfg.loss;
  s.ridge_lambda_ = cfg.loss == LossKind::kRidgeLogistic ? cfg.ridge_lambda : 0.0;
  s.mc_samples_ = cfg.mc_samples;
  s.optimal_model_steps_ = cfg.optimal_model_steps;
  s.seed_ = cfg.seed;
  s.alpha_star_ = simplex::validate_mixture(cfg.alpha_star);
  if (s.alpha_star_->size() != s.k_)
    throw std::invalid_argument("alpha_star length must equal source count");

  // One conditional object, shared by every source: the invariance is
  // structural, not coincidental.
  auto shared_cond = std::make_shared<const Conditional>(cfg.conditional);
  for (const SyntheticSource& src : cfg.sources) {
    if (src.mean.size() != joint || src.cov.rows() != joint)
      throw std::invalid_argument("source moment dimensions mismatch");
    SourceState st;
    st.mean_joint = src.mean;
    st.factor = psd_factor(src.cov);
    st.conditional = shared_cond;
    s.sources_.push_back(std::move(st));
  }

  const uint64_t vkey = validation_stream_key(cfg.seed);
  s.validation_.reserve(cfg.validation_size);
  for (int j = 0; j < cfg.validation_size; ++j)
    s.validation_.push_back(
        s.mixture_draw_uncounted(*s.alpha_star_, rng::derive(vkey, j)));

  s.finish_construction();
  return s;
}

Suite Suite::ingested(std::vector<std::vector<Sample>> train_by_source,
                      std::vector<Sample> validation, std::vector<Sample> test,
                      LossKind loss, double ridge_lambda, int mc_samples,
                      uint64_t optimal_model_steps) {
  if (train_by_source.empty()) throw std::invalid_argument("no sources ingested");
  if (validation.empty()) throw std::invalid_argument("empty validation split");
  Suite s;
  s.synthetic_ = false;
  s.k_ = train_by_source.size();
  s.loss_ = loss;
  s.ridge_lambda_ = loss == LossKind::kRidgeLogistic ? ridge_lambda : 0.0;
  s.mc_samples_ = mc_samples;
  s.optimal_model_steps_ = optimal_model_steps;
  s.x_dim_ = static_cast<int>(validation.front().x.size());
  if (loss == LossKind::kRidgeLogistic && ridge_lambda <= 0)
    throw std::invalid_argument("ridge-logistic needs ridge_lambda > 0");
  for (auto& rows : train_by_source) {
    if (rows.empty())
      throw std::invalid_argument("a source has an empty training split");
    SourceState st;
    st.rows = std::move(rows);
    s.sources_.push_back(std::move(st));
  }
  s.validation_ = std::move(validation);
  s.test_ = std::move(test);
  if (loss == LossKind::kRidgeLogistic) {
    for (const SourceState& src : s.sources_)
      for (const Sample& z : src.rows)
        if (z.y != 1.0 && z.y != -1.0)
          throw std::invalid_argument("ridge-logistic labels must be +/-1");
    for (const Sample& z : s.validation_)
      if (z.y != 1.0 && z.y != -1.0)
        throw std::invalid_argument("ridge-logistic labels must be +/-1");
  }
  s.finish_construction();
  return s;
}

Suite Suite::from_config_file(const std::filesystem::path& path) {
  return from_config(config::Config::load(path));
}

Suite Suite::from_config(const config::Config& cfg,
                         std::optional<uint64_t> seed_override) {
  if (cfg.str_or("kind", "synthetic") != "synthetic")
    throw std::invalid_argument(
        "Suite::from_config handles synthetic suites; use harness::load_suite");
  SyntheticConfig sc;
  const int k = static_cast<int>(cfg.integer("k"));
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  sc.x_dim = static_cast<int>(cfg.integer("x_dim"));
  sc.u_dim = static_cast<int>(cfg.integer_or("u_dim", 0));
  sc.loss = parse_loss_kind(cfg.str_or("loss", "quadratic"));
  sc.ridge_lambda = cfg.num_or("ridge_lambda", 0.01);
  sc.alpha_star = cfg.nums("alpha_star");
  sc.validation_size = static_cast<int>(cfg.integer("validation_size"));
  sc.seed = seed_override ? *seed_override : cfg.uinteger("seed");
  sc.mc_samples = static_cast<int>(cfg.integer_or("mc_samples", 20000));
  sc.optimal_model_steps = cfg.uinteger_or("optimal_model_steps", 1000000);

  const int joint = sc.x_dim + sc.u_dim;
  Conditional cond;
  cond.coef_x = Eigen::VectorXd::Zero(sc.x_dim);
  cond.coef_u = Eigen::VectorXd::Zero(sc.u_dim);
  if (cfg.has("conditional_coef_x")) {
    const auto v = cfg.nums("conditional_coef_x");
    if (static_cast<int>(v.size()) != sc.x_dim)
      throw std::invalid_argument("conditional_coef_x length mismatch");
    cond.coef_x = Eigen::Map<const Eigen::VectorXd>(v.data(), sc.x_dim);
  }
  if (cfg.has("conditional_coef_u")) {
    const auto v = cfg.nums("conditional_coef_u");
    if (static_cast<int>(v.size()) != sc.u_dim)
      throw std::invalid_argument("conditional_coef_u length mismatch");
    cond.coef_u = Eigen::Map<const Eigen::VectorXd>(v.data(), sc.u_dim);
  }
  cond.bias = cfg.num_or("conditional_bias", 0.0);
  cond.noise_std = cfg.num_or("conditional_noise_std", 0.0);
  cond.binarize = cfg.integer_or("conditional_binarize",
                                 sc.loss == LossKind::kRidgeLogistic ? 1 : 0) != 0;
  sc.conditional = std::move(cond);

  for (int i = 1; i <= k; ++i) {
    const std::string prefix = "source." + std::to_string(i) + ".";
    SyntheticSource src;
    const auto mean = cfg.nums(prefix + "mean");
    if (static_cast<int>(mean.size()) != joint)
      throw std::invalid_argument(prefix + "mean needs x_dim + u_dim entries");
    src.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), joint);
    const std::string cov_str = cfg.str(prefix + "cov");
    src.cov = Eigen::MatrixXd::Zero(joint, joint);
    if (cov_str.rfind("diag", 0) == 0) {
      const auto v = parse_nums(cov_str.substr(4), prefix + "cov");
      if (static_cast<int>(v.size()) != joint)
        throw std::invalid_argument(prefix + "cov diag needs x_dim + u_dim entries");
      for (int r = 0; r < joint; ++r) src.cov(r, r) = v[r];
    } else if (cov_str.rfind("full", 0) == 0) {
      const auto v = parse_nums(cov_str.substr(4), prefix + "cov");
      if (static_cast<int>(v.size()) != joint * joint)
        throw std::invalid_argument(prefix + "cov full needs (x_dim + u_dim)^2 entries");
      for (int r = 0; r < joint; ++r)
        for (int col = 0; col < joint; ++col)
          src.cov(r, col) = v[static_cast<size_t>(r) * joint + col];
    } else {
      throw std::invalid_argument(prefix + "cov must start with 'diag' or 'full'");
    }
    sc.sources.push_back(std::move(src));
  }
  return synthetic(sc);
}

void Suite::write_manifest(const std::filesystem::path& csv_path) const {
  textio::CsvWriter out(csv_path);
  out.row({"mu", "beta", "L", "gcal", "sigma", "nu1", "nu2", "rho", "rho2"});
  const Constants& c = constants_;
  out.row({textio::fmt_double(c.mu), textio::fmt_double(c.beta),
           textio::fmt_double(c.L), textio::fmt_double(c.gcal),
           textio::fmt_double(c.sigma), textio::fmt_double(c.nu1),
           textio::fmt_double(c.nu2), textio::fmt_double(c.rho),
           textio::fmt_double(c.rho2)});
}

}  // namespace mixmatch::problems
