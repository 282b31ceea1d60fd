#include "core/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "core/rng.hpp"
#include "core/textio.hpp"

namespace mixmatch::harness {

namespace {

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  if (n <= 0) return;
  int nt = threads > 0 ? threads
                       : static_cast<int>(std::thread::hardware_concurrency());
  nt = std::clamp(nt, 1, n);
  if (nt == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int w = 0; w < nt; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!err) err = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

bool try_parse_double(const std::string& raw, double* out) {
  size_t a = raw.find_first_not_of(" \t\r");
  if (a == std::string::npos) return false;
  size_t b = raw.find_last_not_of(" \t\r");
  const char* first = raw.data() + a;
  const char* last = raw.data() + b + 1;
  double v = 0;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) return false;
  *out = v;
  return true;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

uint64_t fold_label(uint64_t key, const std::string& label) {
  uint64_t h = key;
  for (unsigned char c : label) h = rng::derive(h, c);
  return h;
}

// Median / linear-interpolation quantile of an unsorted copy.
double quantile(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

Mixture basis_mixture(int k, int i) {
  Mixture e(k, 0.0);
  e[i] = 1.0;
  return e;
}

Mixture project_simplex(Mixture v) {
  const int k = static_cast<int>(v.size());
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0, tau = 0;
  for (int j = 0; j < k; ++j) {
    cum += u[j];
    const double cand = (1.0 - cum) / (j + 1);
    if (u[j] + cand > 0) tau = cand;
  }
  for (double& x : v) x = std::max(x + tau, 0.0);
  return v;
}

void enumerate_grid(int k, int res, const std::function<void(const Mixture&)>& fn) {
  Mixture alpha(k, 0.0);
  std::function<void(int, int)> rec = [&](int coord, int rem) {
    if (coord == k - 1) {
      alpha[coord] = static_cast<double>(rem) / res;
      fn(alpha);
      return;
    }
    for (int c = 0; c <= rem; ++c) {
      alpha[coord] = static_cast<double>(c) / res;
      rec(coord + 1, rem - c);
    }
  };
  rec(0, res);
}

int grid_resolution(int k) {
  if (k <= 4) return 64;
  if (k == 5) return 16;
  if (k == 6) return 8;
  return 4;
}

// Exact minimizer of 0.5 |M a - target|^2 over the simplex: active-set
// refinement of a projected-gradient start. The equality-constrained solve on
// a support is a KKT system; coordinates that go negative leave the support,
// outside coordinates with gradient below the face's multiplier enter.
Mixture minimize_quadratic_over_simplex(const Eigen::MatrixXd& m,
                                        const Eigen::VectorXd& target,
                                        Mixture start) {
  const int k = static_cast<int>(m.cols());
  const Eigen::MatrixXd gram = m.transpose() * m;
  const Eigen::VectorXd lin = m.transpose() * target;
  const double lip = gram.trace() + 1e-12;

  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(start.data(), k);
  for (int it = 0; it < 500; ++it) {
    const Eigen::VectorXd grad = gram * a - lin;
    Mixture step(k);
    for (int i = 0; i < k; ++i) step[i] = a[i] - grad[i] / lip;
    step = project_simplex(std::move(step));
    a = Eigen::Map<const Eigen::VectorXd>(step.data(), k);
  }

  std::vector<bool> active(k);
  for (int i = 0; i < k; ++i) active[i] = a[i] > 1e-12;
  for (int round = 0; round < 4 * k + 8; ++round) {
    std::vector<int> sup;
    for (int i = 0; i < k; ++i)
      if (active[i]) sup.push_back(i);
    const int s = static_cast<int>(sup.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s + 1);
    for (int r = 0; r < s; ++r) {
      for (int c = 0; c < s; ++c) kkt(r, c) = gram(sup[r], sup[c]);
      kkt(r, s) = 1;
      kkt(s, r) = 1;
      rhs[r] = lin[sup[r]];
    }
    rhs[s] = 1;
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    int worst = -1;
    for (int r = 0; r < s; ++r)
      if (sol[r] < -1e-12 && (worst < 0 || sol[r] < sol[worst])) worst = r;
    if (worst >= 0) {
      active[sup[worst]] = false;
      continue;
    }
    Eigen::VectorXd full = Eigen::VectorXd::Zero(k);
    for (int r = 0; r < s; ++r) full[sup[r]] = std::max(sol[r], 0.0);
    const double lambda = sol[s];
    const Eigen::VectorXd grad = gram * full - lin;
    int enter = -1;
    double gap = -1e-9;
    for (int i = 0; i < k; ++i) {
      if (active[i]) continue;
      // KKT: inactive coordinates need grad_i >= -lambda
      if (grad[i] + lambda < gap) {
        gap = grad[i] + lambda;
        enter = i;
      }
    }
    a = full;
    if (enter < 0) break;
    active[enter] = true;
  }

  Mixture out(k);
  double sum = 0;
  for (int i = 0; i < k; ++i) {
    out[i] = std::max(a[i], 0.0);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

}  // namespace

std::string mixture_json(const Mixture& alpha) { return textio::json_array(alpha); }

// ------------------------------------------------------------ suite loading

problems::Suite load_suite(const std::filesystem::path& config_path,
                           std::optional<uint64_t> seed_override) {
  const config::Config cfg = config::Config::load(config_path);
  const std::string kind = cfg.str_or("kind", "synthetic");
  if (kind == "synthetic") return problems::Suite::from_config(cfg, seed_override);
  if (kind == "ingest") {
    IngestSpec spec = parse_ingest_spec(cfg);
    if (seed_override) spec.seed = *seed_override;
    return ingest_csv(spec);
  }
  throw std::invalid_argument("unknown suite kind '" + kind + "'");
}

// ---------------------------------------------------------------- ingestion

IngestSpec parse_ingest_spec(const config::Config& cfg) {
  IngestSpec spec;
  spec.csv = cfg.resolve(cfg.str("csv"));
  spec.source_column = cfg.str("source_column");
  spec.label_column = cfg.str("label_column");
  spec.loss = problems::parse_loss_kind(cfg.str_or("loss", "quadratic"));
  spec.ridge_lambda = cfg.num_or("ridge_lambda", 0.01);
  spec.seed = cfg.uinteger("seed");
  spec.mc_samples = static_cast<int>(cfg.integer_or("mc_samples", 20000));
  spec.optimal_model_steps = cfg.uinteger_or("optimal_model_steps", 1000000);
  for (const std::string& key : cfg.keys_with_prefix("split.")) {
    const auto parts = cfg.nums(key);
    if (parts.size() != 4)
      throw std::invalid_argument(key + " needs 4 percentages (train validate test discard)");
    spec.splits.emplace_back(key.substr(6),
                             std::array<double, 4>{parts[0], parts[1], parts[2], parts[3]});
  }
  if (spec.splits.empty())
    throw std::invalid_argument("ingest config needs at least one split.<source> entry");
  return spec;
}

problems::Suite ingest_csv(const IngestSpec& spec, IngestReport* report) {
  for (const auto& [value, pct] : spec.splits) {
    const double sum = pct[0] + pct[1] + pct[2] + pct[3];
    if (std::abs(sum - 100.0) > 0.01)
      throw std::invalid_argument("split percentages for '" + value +
                                  "' sum to " + textio::fmt_double(sum) +
                                  ", expected 100");
  }

  const auto rows = textio::read_csv(spec.csv);
  if (rows.size() < 2)
    throw std::invalid_argument("ingest: no data rows in " + spec.csv.string());
  const auto& header = rows.front();
  const auto col_of = [&](const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("ingest: column '" + name + "' not found");
  };
  const int source_col = col_of(spec.source_column);
  const int label_col = col_of(spec.label_column);

  std::vector<int> feature_cols;
  for (int i = 0; i < static_cast<int>(header.size()); ++i)
    if (i != source_col && i != label_col) feature_cols.push_back(i);

  // Column typing: numeric iff every cell parses; otherwise one-hot over the
  // column's sorted distinct values.
  struct ColumnPlan {
    bool numeric = true;
    std::map<std::string, int> categories;  // value -> slot offset
  };
  std::vector<ColumnPlan> plans(feature_cols.size());
  for (size_t c = 0; c < feature_cols.size(); ++c) {
    double v = 0;
    for (size_t r = 1; r < rows.size(); ++r) {
      if (static_cast<size_t>(feature_cols[c]) >= rows[r].size())
        throw std::invalid_argument("ingest: short row " + std::to_string(r + 1));
      if (!try_parse_double(rows[r][feature_cols[c]], &v)) {
        plans[c].numeric = false;
        break;
      }
    }
    if (!plans[c].numeric) {
      for (size_t r = 1; r < rows.size(); ++r)
        plans[c].categories.emplace(rows[r][feature_cols[c]], 0);
      int slot = 0;
      for (auto& [value, offset] : plans[c].categories) offset = slot++;
    }
  }
  int dim = 0;
  std::vector<int> col_offset(feature_cols.size());
  for (size_t c = 0; c < feature_cols.size(); ++c) {
    col_offset[c] = dim;
    dim += plans[c].numeric ? 1 : static_cast<int>(plans[c].categories.size());
  }
  if (dim == 0) throw std::invalid_argument("ingest: no feature columns");

  // Group rows by source value, first-appearance order.
  std::vector<std::string> group_values;
  std::map<std::string, int> group_of;
  std::vector<std::vector<problems::Sample>> groups;
  for (size_t r = 1; r < rows.size(); ++r) {
    if (static_cast<size_t>(source_col) >= rows[r].size() ||
        static_cast<size_t>(label_col) >= rows[r].size())
      throw std::invalid_argument("ingest: short row " + std::to_string(r + 1));
    const std::string& value = rows[r][source_col];
    auto it = group_of.find(value);
    if (it == group_of.end()) {
      it = group_of.emplace(value, static_cast<int>(groups.size())).first;
      group_values.push_back(value);
      groups.emplace_back();
    }
    problems::Sample z;
    z.x = Eigen::VectorXd::Zero(dim);
    for (size_t c = 0; c < feature_cols.size(); ++c) {
      const std::string& cell = rows[r][feature_cols[c]];
      if (plans[c].numeric) {
        double v = 0;
        try_parse_double(cell, &v);
        z.x[col_offset[c]] = v;
      } else {
        z.x[col_offset[c] + plans[c].categories.at(cell)] = 1.0;
      }
    }
    if (!try_parse_double(rows[r][label_col], &z.y))
      throw std::invalid_argument("ingest: non-numeric label in row " +
                                  std::to_string(r + 1));
    groups[it->second].push_back(std::move(z));
  }

  const auto split_for = [&](const std::string& value) -> const std::array<double, 4>& {
    for (const auto& [v, pct] : spec.splits)
      if (v == value) return pct;
    throw std::invalid_argument("ingest: no split.<source> entry for '" + value + "'");
  };
  for (const auto& [value, pct] : spec.splits)
    if (!group_of.count(value))
      throw std::invalid_argument("ingest: split entry '" + value +
                                  "' matches no rows");

  std::vector<std::vector<problems::Sample>> train_by_source(groups.size());
  std::vector<problems::Sample> validation, test;
  IngestReport rep;
  rep.feature_dim = static_cast<size_t>(dim);
  for (size_t g = 0; g < groups.size(); ++g) {
    auto& rows_g = groups[g];
    const size_t n = rows_g.size();
    const auto& pct = split_for(group_values[g]);
    size_t counts[4];
    for (int b = 0; b < 4; ++b)
      counts[b] = static_cast<size_t>(
          std::floor(static_cast<double>(n) * pct[b] / 100.0));
    const size_t assigned = counts[0] + counts[1] + counts[2] + counts[3];
    counts[0] += n - assigned;  // remainder joins the train slice

    rng::Stream shuffle(rng::derive(rng::derive(spec.seed, rng::kSaltIngest),
                                    static_cast<uint64_t>(g)));
    for (size_t i = n - 1; i >= 1; --i) {
      const size_t j = shuffle.next_below(i + 1);
      std::swap(rows_g[i], rows_g[j]);
    }

    size_t at = 0;
    for (size_t i = 0; i < counts[0]; ++i) train_by_source[g].push_back(rows_g[at++]);
    for (size_t i = 0; i < counts[1]; ++i) validation.push_back(rows_g[at++]);
    for (size_t i = 0; i < counts[2]; ++i) test.push_back(rows_g[at++]);

    rep.sources.push_back(IngestCounts{group_values[g], n, counts[0], counts[1],
                                       counts[2], counts[3]});
  }
  if (report) *report = rep;

  return problems::Suite::ingested(std::move(train_by_source), std::move(validation),
                                   std::move(test), spec.loss, spec.ridge_lambda,
                                   spec.mc_samples, spec.optimal_model_steps);
}

// ------------------------------------------------------------------- regret

RegretOracle::RegretOracle(const problems::Suite& suite) : suite_(&suite) {
  const int k = suite.num_sources();
  if (suite.loss() == problems::LossKind::kQuadratic) {
    exact_ = true;
    Eigen::MatrixXd m(suite.model_dim(), k);
    for (int i = 0; i < k; ++i) m.col(i) = suite.mixture_mean(basis_mixture(k, i));
    Eigen::VectorXd target;
    if (suite.has_alpha_star()) {
      target = suite.mixture_mean(suite.alpha_star());
    } else {
      if (suite.test_set().empty())
        throw std::invalid_argument(
            "regret oracle: suite has neither a best mixture nor test rows");
      target = Eigen::VectorXd::Zero(suite.model_dim());
      for (const auto& z : suite.test_set()) target += z.x;
      target /= static_cast<double>(suite.test_set().size());
    }

    Mixture best;
    double best_val = std::numeric_limits<double>::infinity();
    enumerate_grid(k, grid_resolution(k), [&](const Mixture& alpha) {
      const double v = g_of(alpha);
      if (v < best_val) {
        best_val = v;
        best = alpha;
      }
    });
    Mixture polished = minimize_quadratic_over_simplex(m, target, best);
    const double pol_val = g_of(polished);
    if (pol_val < best_val) {
      best_val = pol_val;
      best = polished;
    }
    if (suite.has_alpha_star()) {
      // The generator's mixture attains the test mean exactly, so it is the
      // true minimizer; keep it unless the search somehow edged below.
      const double star_val = g_of(suite.alpha_star());
      if (star_val <= best_val) {
        best_val = star_val;
        best = suite.alpha_star();
      }
    }
    minimizer_ = std::move(best);
    g_min_ = best_val;
    has_min_ = true;
    return;
  }

  // ridge-logistic: estimates only
  exact_ = false;
  if (suite.has_alpha_star()) {
    has_min_ = true;
    minimizer_ = suite.alpha_star();
    g_min_ = g_of(minimizer_);
  } else {
    has_min_ = false;
  }
}

double RegretOracle::g_of(const Mixture& alpha) const {
  const problems::ModelEstimate w_star = suite_->optimal_model(alpha);
  if (suite_->loss() == problems::LossKind::kQuadratic)
    return test_loss(w_star.w);
  // 5-fold averaged long-SGD estimate of the alpha-optimal model.
  const problems::Constants& c = suite_->constants();
  const sgd::StepSchedule schedule = sgd::StepSchedule::theoretical(c.mu, 100.0);
  const uint64_t base = rng::derive(suite_->seed(), rng::kSaltOptModel);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(suite_->model_dim());
  const int folds = 5;
  for (int f = 0; f < folds; ++f) {
    problems::SampleStream stream(rng::derive(base, static_cast<uint64_t>(f + 1)));
    sgd::Run run = sgd::run_sgd(*suite_, alpha,
                                Eigen::VectorXd::Zero(suite_->model_dim()),
                                suite_->optimal_model_steps(), schedule, stream);
    acc += run.model.w;
  }
  acc /= folds;
  return test_loss(acc);
}

double RegretOracle::test_loss(const Eigen::VectorXd& w) const {
  if (suite_->is_synthetic())
    return suite_->averaged_loss(suite_->alpha_star(), w).value;
  const auto& test = suite_->test_set();
  if (test.empty())
    throw std::invalid_argument("regret oracle: suite has no test rows");
  double acc = 0;
  for (const auto& z : test) acc += suite_->sample_loss(w, z);
  return acc / static_cast<double>(test.size());
}

double RegretOracle::g_min() const {
  if (!has_min_)
    throw std::logic_error("regret oracle: minimum unavailable for this suite");
  return g_min_;
}

const Mixture& RegretOracle::minimizer() const {
  if (!has_min_)
    throw std::logic_error("regret oracle: minimum unavailable for this suite");
  return minimizer_;
}

double RegretOracle::simple_regret(const Mixture& alpha) const {
  return g_of(alpha) - g_min();
}

double RegretOracle::model_regret(const Eigen::VectorXd& w) const {
  const double loss = test_loss(w);
  return has_min_ ? loss - g_min_ : loss;
}

double simple_regret(const problems::Suite& suite, const Mixture& alpha) {
  return RegretOracle(suite).simple_regret(alpha);
}

// ------------------------------------------------------- theorem harnesses

namespace {

Mixture draw_dirichlet(int k, rng::Stream& stream) {
  Mixture alpha(k);
  double sum = 0;
  for (int i = 0; i < k; ++i) {
    alpha[i] = -std::log(stream.next_unit());
    sum += alpha[i];
  }
  if (sum <= 0) return Mixture(k, 1.0 / k);
  for (double& a : alpha) a /= sum;
  return alpha;
}

double l1_distance(const Mixture& a, const Mixture& b) {
  double acc = 0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc;
}

}  // namespace

SmoothnessReport verify_smoothness(const problems::Suite& suite, int pairs,
                                   uint64_t seed) {
  if (suite.loss() != problems::LossKind::kQuadratic)
    throw std::invalid_argument("verify_smoothness needs closed-form optima (quadratic)");
  if (pairs < 1) throw std::invalid_argument("verify_smoothness: pairs must be >= 1");

  const problems::Constants& c = suite.constants();
  const RegretOracle oracle(suite);
  const int k = suite.num_sources();
  rng::Stream stream(rng::derive(seed, rng::kSaltHarness));

  SmoothnessReport rep;
  rep.pairs = pairs;
  for (int p = 0; p < pairs; ++p) {
    const Mixture a1 = draw_dirichlet(k, stream);
    const Mixture a2 = draw_dirichlet(k, stream);
    const Eigen::VectorXd w1 = suite.optimal_model(a1).w;
    const Eigen::VectorXd w2 = suite.optimal_model(a2).w;
    const double lhs_w = (w1 - w2).norm();
    const double rhs_w = (2.0 * c.sigma / c.mu) * l1_distance(a1, a2);
    if (lhs_w > rhs_w) ++rep.violations_model;
    if (rhs_w > 0) rep.max_ratio_model = std::max(rep.max_ratio_model, lhs_w / rhs_w);

    const double lhs_g = std::abs(oracle.g_of(a1) - oracle.g_of(a2));
    const double rhs_g = c.L * lhs_w;
    if (lhs_g > rhs_g) ++rep.violations_value;
    if (rhs_g > 0) rep.max_ratio_value = std::max(rep.max_ratio_value, lhs_g / rhs_g);
  }
  return rep;
}

ConcentrationReport verify_concentration(const problems::Suite& suite,
                                         const ConcentrationOptions& opt) {
  if (suite.loss() != problems::LossKind::kQuadratic)
    throw std::invalid_argument("verify_concentration needs closed-form optima (quadratic)");
  if (opt.lambda_budget < static_cast<double>(opt.t_max) + 1.0)
    throw std::invalid_argument("verify_concentration: budget must be >= t_max + 1");
  if (opt.replicas < 1)
    throw std::invalid_argument("verify_concentration: replicas must be >= 1");

  const problems::Constants& c = suite.constants();
  const int k = suite.num_sources();
  const Mixture alpha =
      suite.has_alpha_star() ? suite.alpha_star() : Mixture(k, 1.0 / k);
  const Eigen::VectorXd w_star = suite.optimal_model(alpha).w;
  const double d0_sq = w_star.squaredNorm();  // runs start from zero

  std::vector<uint64_t> grid = opt.grid;
  if (grid.empty()) {
    grid.push_back(0);
    for (int j = 0;; ++j) {
      const uint64_t t =
          static_cast<uint64_t>(std::llround(std::pow(10.0, j / 4.0)));
      if (t > opt.t_max) break;
      if (t != grid.back()) grid.push_back(t);
    }
    if (grid.back() != opt.t_max) grid.push_back(opt.t_max);
  }
  for (uint64_t t : grid)
    if (t > opt.t_max)
      throw std::invalid_argument("verify_concentration: grid point beyond t_max");

  ConcentrationReport rep;
  rep.replicas = opt.replicas;
  rep.schedule_E = opt.schedule_E.value_or(sgd::compute_E(c.kappa, opt.lambda_budget));
  const sgd::StepSchedule schedule =
      sgd::StepSchedule::theoretical(c.mu, rep.schedule_E);

  // dsq[g][r]: squared distance at grid point g for replica r.
  std::vector<std::vector<double>> dsq(grid.size(),
                                       std::vector<double>(opt.replicas, 0.0));
  const uint64_t base = rng::derive(opt.seed, rng::kSaltHarness);
  parallel_for(opt.replicas, 0, [&](int r) {
    problems::SampleStream stream(rng::derive(base, static_cast<uint64_t>(r)));
    const sgd::Run run = sgd::run_sgd(suite, alpha,
                                      Eigen::VectorXd::Zero(suite.model_dim()),
                                      opt.t_max, schedule, stream, &w_star);
    for (size_t g = 0; g < grid.size(); ++g) dsq[g][r] = run.trace[grid[g]];
  });

  rep.pass = true;
  for (size_t g = 0; g < grid.size(); ++g) {
    ConcentrationPoint pt;
    pt.t = grid[g];
    const auto& col = dsq[g];
    pt.mean_dsq = std::accumulate(col.begin(), col.end(), 0.0) /
                  static_cast<double>(col.size());
    pt.median_dsq = quantile(col, 0.5);
    std::vector<double> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    const size_t rank = static_cast<size_t>(
        std::ceil(0.99 * static_cast<double>(sorted.size())));
    pt.p99_dsq = sorted[std::min(rank, sorted.size()) - 1];

    const sgd::Bound bound = sgd::concentration_bound(d0_sq, c, opt.diameter, pt.t,
                                                 opt.lambda_budget, opt.k);
    pt.bound_term_g = bound.term_g;
    pt.bound_term_diameter = bound.term_diameter;
    pt.bound_term_martingale = bound.term_martingale;
    pt.bound_total = bound.total;
    for (double v : col)
      if (v > bound.total) ++pt.violations;
    const double p = std::min(1.0, (static_cast<double>(pt.t) + 1.0) /
                                       std::pow(opt.lambda_budget, 8.0));
    pt.allowed_rate = p + 3.0 * std::sqrt(p * (1.0 - p) /
                                          static_cast<double>(opt.replicas));
    pt.ok = static_cast<double>(pt.violations) /
                static_cast<double>(opt.replicas) <=
            pt.allowed_rate;
    rep.pass = rep.pass && pt.ok;
    rep.points.push_back(pt);
  }
  return rep;
}

// -------------------------------------------------------------- experiments

ExperimentConfig parse_experiment_config(const config::Config& cfg) {
  ExperimentConfig out;
  out.suite_config = cfg.resolve(cfg.str("suite"));
  out.algorithms = split_words(cfg.str("algorithms"));
  if (out.algorithms.empty())
    throw std::invalid_argument("experiment: algorithms list is empty");
  for (const std::string& label : out.algorithms) {
    if (label == "mixmatch" || label == "mixmatch+0.1step") continue;
    baselines::BaselineKind::parse(label);  // throws on unknown labels
  }
  for (double l : cfg.nums("lambdas")) {
    if (l < 1) throw std::invalid_argument("experiment: budgets must be >= 1");
    out.lambdas.push_back(static_cast<uint64_t>(l));
  }
  if (out.lambdas.empty())
    throw std::invalid_argument("experiment: lambdas list is empty");
  out.replicas = static_cast<int>(cfg.integer_or("replicas", 10));
  if (out.replicas < 1)
    throw std::invalid_argument("experiment: replicas must be >= 1");
  out.master_seed = cfg.uinteger_or("master_seed", 0);
  out.node_steps = cfg.uinteger_or("node_steps", 500);
  out.strategy.kind = simplex::parse_partition_kind(cfg.str_or("strategy", "bisect"));
  out.strategy.rng_seed = cfg.uinteger_or("strategy_seed", 0);
  out.schedule_spec = cfg.str_or("schedule", "practical:0.05");
  if (cfg.has("nu2")) out.nu2 = cfg.num("nu2");
  if (cfg.has("rho2")) out.rho2 = cfg.num("rho2");
  out.widen_final_pool = cfg.integer_or("widen_final_pool", 0) != 0;
  out.threads = static_cast<int>(cfg.integer_or("threads", 0));
  return out;
}

namespace {

struct CellJob {
  std::string algorithm;
  uint64_t lambda = 0;
  int replica = 0;
};

CellResult run_cell(const CellJob& job, const problems::Suite& suite,
                    const RegretOracle& oracle, const ExperimentConfig& cfg,
                    uint64_t algo_seed) {
  CellResult out;
  out.algorithm = job.algorithm;
  out.lambda = job.lambda;
  out.replica = job.replica;

  const problems::Constants& c = suite.constants();
  const double default_E =
      job.lambda > 1 ? sgd::compute_E(std::max(c.kappa, 1.0),
                                      static_cast<double>(job.lambda))
                     : 1.0;
  const sgd::StepSchedule schedule =
      sgd::StepSchedule::parse(cfg.schedule_spec, c.mu, default_E);

  const auto search_params = [&](uint64_t budget) {
    treesearch::Params p;
    p.budget = budget;
    p.node_steps = treesearch::constant_steps(cfg.node_steps);
    p.strategy = cfg.strategy;
    p.schedule = schedule;
    p.nu2 = cfg.nu2.value_or(c.nu2);
    p.rho2 = cfg.rho2.value_or(c.rho2);
    p.seed = algo_seed;
    p.widen_final_pool = cfg.widen_final_pool;
    return p;
  };

  if (job.algorithm == "mixmatch") {
    const treesearch::Result res = treesearch::mix_and_match(suite, search_params(job.lambda));
    out.regret = oracle.model_regret(res.model.w);
    out.h_final = res.height_final;
    out.total_steps = res.total_steps;
    return out;
  }
  if (job.algorithm == "mixmatch+0.1step") {
    const uint64_t half = job.lambda / 2;
    const treesearch::Result res = treesearch::mix_and_match(suite, search_params(half));
    sgd::StepSchedule refined = schedule;
    if (refined.mode == sgd::StepSchedule::Mode::kPractical) {
      refined.eta *= 0.1;
    } else {
      refined.mu *= 10.0;  // 2/(10 mu (t+E)) = 0.1 of the base step
    }
    problems::SampleStream stream(rng::derive(algo_seed, rng::kSaltRefine));
    const uint64_t rest = job.lambda - half;
    const sgd::Run run =
        sgd::run_sgd(suite, res.alpha, res.model.w, rest, refined, stream);
    out.regret = oracle.model_regret(run.model.w);
    out.h_final = res.height_final;
    out.total_steps = res.total_steps + rest;
    return out;
  }

  const baselines::BaselineKind kind = baselines::BaselineKind::parse(job.algorithm);
  const baselines::BaselineResult res =
      baselines::run_baseline(kind, suite, job.lambda, schedule, algo_seed);
  out.regret = oracle.model_regret(res.model.w);
  out.h_final = 0;
  out.total_steps = res.total_steps;
  return out;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const std::filesystem::path& out_dir) {
  const uint64_t base = rng::derive(cfg.master_seed, rng::kSaltHarness);
  const uint64_t suite_base = rng::derive(base, 101);
  const uint64_t algo_base = rng::derive(base, 202);

  // One suite draw per replica, shared by every algorithm and budget so the
  // comparisons are paired.
  std::vector<std::unique_ptr<problems::Suite>> suites;
  std::vector<std::unique_ptr<RegretOracle>> oracles;
  for (int r = 0; r < cfg.replicas; ++r) {
    const uint64_t seed = rng::derive(suite_base, static_cast<uint64_t>(r));
    suites.push_back(std::make_unique<problems::Suite>(
        load_suite(cfg.suite_config, seed)));
    oracles.push_back(std::make_unique<RegretOracle>(*suites.back()));
  }

  std::vector<CellJob> jobs;
  for (const std::string& algo : cfg.algorithms)
    for (uint64_t lambda : cfg.lambdas)
      for (int r = 0; r < cfg.replicas; ++r)
        jobs.push_back(CellJob{algo, lambda, r});

  std::vector<CellResult> cells(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), cfg.threads, [&](int i) {
    const CellJob& job = jobs[i];
    // The budget stays out of the seed: a replica's search at a larger
    // budget then extends the identical expansion sequence.
    const uint64_t algo_seed = rng::derive(fold_label(algo_base, job.algorithm),
                                           static_cast<uint64_t>(job.replica));
    try {
      cells[i] = run_cell(job, *suites[job.replica], *oracles[job.replica], cfg,
                          algo_seed);
    } catch (const std::exception& e) {
      cells[i] = CellResult{job.algorithm, job.lambda, job.replica, 0.0, 0, 0,
                            true, e.what()};
    }
  });

  std::sort(cells.begin(), cells.end(), [](const CellResult& a, const CellResult& b) {
    if (a.algorithm != b.algorithm) return a.algorithm < b.algorithm;
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    return a.replica < b.replica;
  });

  std::filesystem::create_directories(out_dir);
  {
    textio::CsvWriter curve(out_dir / "regret_curve.csv");
    curve.row({"algorithm", "lambda", "seed", "regret", "h_final", "total_steps"});
    for (const CellResult& cell : cells) {
      if (cell.failed) continue;
      curve.row({cell.algorithm, textio::fmt_u64(cell.lambda),
                 textio::fmt_int(cell.replica), textio::fmt_double(cell.regret),
                 textio::fmt_int(cell.h_final), textio::fmt_u64(cell.total_steps)});
    }
  }
  {
    textio::CsvWriter errors(out_dir / "errors.csv");
    errors.row({"algorithm", "lambda", "seed", "error"});
    for (const CellResult& cell : cells)
      if (cell.failed)
        errors.row({cell.algorithm, textio::fmt_u64(cell.lambda),
                    textio::fmt_int(cell.replica), cell.error});
  }
  {
    textio::CsvWriter summary(out_dir / "summary.csv");
    summary.row({"algorithm", "lambda", "replicas", "regret_q25", "regret_median",
                 "regret_q75", "h_final_median", "failures"});
    for (size_t i = 0; i < cells.size();) {
      size_t j = i;
      std::vector<double> regrets, heights;
      int failures = 0;
      while (j < cells.size() && cells[j].algorithm == cells[i].algorithm &&
             cells[j].lambda == cells[i].lambda) {
        if (cells[j].failed) {
          ++failures;
        } else {
          regrets.push_back(cells[j].regret);
          heights.push_back(cells[j].h_final);
        }
        ++j;
      }
      summary.row({cells[i].algorithm, textio::fmt_u64(cells[i].lambda),
                   textio::fmt_int(static_cast<int64_t>(j - i)),
                   textio::fmt_double(quantile(regrets, 0.25)),
                   textio::fmt_double(quantile(regrets, 0.5)),
                   textio::fmt_double(quantile(regrets, 0.75)),
                   textio::fmt_double(quantile(heights, 0.5)),
                   textio::fmt_int(failures)});
      i = j;
    }
  }

  ExperimentReport rep;
  rep.cells = std::move(cells);
  return rep;
}

// ------------------------------------------------------------ CSV artifacts

void write_search_csv(const treesearch::Result& result,
                      const std::filesystem::path& path) {
  textio::CsvWriter out(path);
  out.row({"order", "height", "index", "alpha_json", "steps", "val_loss", "b_value"});
  for (const auto& row : result.audit)
    out.row({textio::fmt_u64(row.order), textio::fmt_int(row.height),
             row.index.str(), mixture_json(row.alpha), textio::fmt_u64(row.steps),
             textio::fmt_double(row.val_loss), textio::fmt_double(row.b_value)});
}

void write_result_csv(const std::string& alpha_field, int height,
                      uint64_t total_steps, std::optional<double> regret,
                      const std::filesystem::path& path) {
  textio::CsvWriter out(path);
  out.row({"alpha_json", "height", "total_steps", "regret_if_known"});
  out.row({alpha_field, textio::fmt_int(height), textio::fmt_u64(total_steps),
           regret ? textio::fmt_double(*regret) : ""});
}

void write_smoothness_csv(const SmoothnessReport& report,
                          const std::filesystem::path& path) {
  textio::CsvWriter out(path);
  out.row({"pairs", "violations_model", "violations_value", "max_ratio_model",
           "max_ratio_value"});
  out.row({textio::fmt_int(report.pairs), textio::fmt_int(report.violations_model),
           textio::fmt_int(report.violations_value),
           textio::fmt_double(report.max_ratio_model),
           textio::fmt_double(report.max_ratio_value)});
}

void write_concentration_csv(const ConcentrationReport& report,
                             const std::filesystem::path& path) {
  textio::CsvWriter out(path);
  out.row({"t", "empirical_mean_dsq", "empirical_p99_dsq", "bound_term_G",
           "bound_term_diam", "bound_term_mart", "bound_total"});
  for (const auto& pt : report.points)
    out.row({textio::fmt_u64(pt.t), textio::fmt_double(pt.mean_dsq),
             textio::fmt_double(pt.p99_dsq), textio::fmt_double(pt.bound_term_g),
             textio::fmt_double(pt.bound_term_diameter),
             textio::fmt_double(pt.bound_term_martingale),
             textio::fmt_double(pt.bound_total)});
}

void write_partition_demo_csv(int k, int height,
                              const simplex::PartitionStrategy& strategy,
                              const std::filesystem::path& path) {
  if (k < 1) throw std::invalid_argument("partition demo: k must be >= 1");
  if (height < 0 || height > 24)
    throw std::invalid_argument("partition demo: height must lie in [0, 24]");
  textio::CsvWriter out(path);
  out.row({"height", "index", "diameter_l1", "bound", "vertex_json"});
  std::vector<simplex::Cell> level{simplex::root_cell(k)};
  for (int h = 0; h <= height; ++h) {
    for (const simplex::Cell& cell : level) {
      std::string verts = "[";
      for (size_t v = 0; v < cell.vertices.size(); ++v) {
        if (v) verts += ",";
        verts += textio::json_array(cell.vertices[v]);
      }
      verts += "]";
      const bool bounded =
          k >= 2 && strategy.kind == simplex::PartitionKind::kLongestEdgeBisection;
      out.row({textio::fmt_int(h), cell.index.str(),
               textio::fmt_double(simplex::cell_diameter_l1(cell)),
               bounded ? textio::fmt_double(simplex::diameter_bound_l1(k, h))
                       : "nan",
               verts});
    }
    if (h == height || k < 2) break;
    std::vector<simplex::Cell> next;
    next.reserve(level.size() * 2);
    for (const simplex::Cell& cell : level) {
      auto children = simplex::split_cell(cell, strategy);
      next.push_back(std::move(children.first));
      next.push_back(std::move(children.second));
    }
    level = std::move(next);
  }
}

void write_ingest_counts_csv(const IngestReport& report,
                             const std::filesystem::path& path) {
  textio::CsvWriter out(path);
  out.row({"source", "total", "train", "validate", "test", "discard"});
  for (const auto& s : report.sources)
    out.row({s.source, textio::fmt_u64(s.total), textio::fmt_u64(s.train),
             textio::fmt_u64(s.validate), textio::fmt_u64(s.test),
             textio::fmt_u64(s.discard)});
}

}  // namespace mixmatch::harness
