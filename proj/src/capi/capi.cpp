#include "mixmatch/mixmatch.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "core/baselines.hpp"
#include "core/harness.hpp"
#include "core/problems.hpp"
#include "core/sgd.hpp"
#include "core/simplex.hpp"
#include "core/textio.hpp"
#include "core/treesearch.hpp"

struct mm_suite {
  mixmatch::problems::Suite impl;
};

struct mm_search_result {
  mixmatch::treesearch::Result impl;
};

namespace {

namespace mx = mixmatch;

thread_local std::string t_error;

mm_status fail(mm_status code, const std::string& msg) {
  t_error = msg;
  return code;
}

// Exception -> status mapping. SgdError is numeric trouble; the argument and
// logic categories are caller mistakes; anything else is environment.
template <typename Fn>
mm_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const mx::sgd::SgdError& e) {
    return fail(MM_ERR_NUMERIC, e.what());
  } catch (const std::logic_error& e) {
    return fail(MM_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(MM_ERR_IO, e.what());
  }
}

mm_status require(bool ok, const char* what) {
  return ok ? MM_OK : fail(MM_ERR_INVALID_ARGUMENT, what);
}

// Model regret when the suite supports an exact oracle; empty otherwise.
// "Known" means closed form: estimate-grade oracles stay out of result CSVs.
std::optional<double> known_regret(const mx::problems::Suite& suite,
                                   const Eigen::VectorXd& w) {
  if (suite.loss() != mx::problems::LossKind::kQuadratic) return std::nullopt;
  mx::harness::RegretOracle oracle(suite);
  if (!oracle.has_min() || !oracle.exact()) return std::nullopt;
  return oracle.model_regret(w);
}

}  // namespace

extern "C" {

const char* mm_version(void) { return "1.0.0"; }

const char* mm_last_error(void) { return t_error.c_str(); }

/* ------------------------------------------------------------------ suite */

mm_status mm_suite_open(const char* config_path, mm_suite** out) {
  if (mm_status s = require(config_path && out, "mm_suite_open: null argument");
      s != MM_OK)
    return s;
  *out = nullptr;
  return guarded([&] {
    *out = new mm_suite{mx::harness::load_suite(config_path)};
    return MM_OK;
  });
}

void mm_suite_close(mm_suite* suite) { delete suite; }

int mm_suite_num_sources(const mm_suite* suite) {
  return suite ? suite->impl.num_sources() : 0;
}

int mm_suite_model_dim(const mm_suite* suite) {
  return suite ? suite->impl.model_dim() : 0;
}

mm_status mm_suite_write_manifest(const mm_suite* suite, const char* csv_path) {
  if (mm_status s = require(suite && csv_path, "mm_suite_write_manifest: null argument");
      s != MM_OK)
    return s;
  return guarded([&] {
    suite->impl.write_manifest(csv_path);
    return MM_OK;
  });
}

/* ----------------------------------------------------------------- search */

mm_status mm_search_run(const mm_suite* suite, uint64_t budget,
                        uint64_t node_steps, const char* strategy,
                        uint64_t strategy_seed, const char* schedule,
                        double nu2, double rho2, uint64_t seed,
                        int widen_final_pool, mm_search_result** out) {
  if (mm_status s = require(suite && strategy && schedule && out,
                            "mm_search_run: null argument");
      s != MM_OK)
    return s;
  *out = nullptr;
  return guarded([&] {
    const mx::problems::Constants& c = suite->impl.constants();
    const double default_E =
        budget > 1 ? mx::sgd::compute_E(std::max(c.kappa, 1.0),
                                        static_cast<double>(budget))
                   : 1.0;
    mx::treesearch::Params params;
    params.budget = budget;
    params.node_steps = mx::treesearch::constant_steps(node_steps);
    params.strategy.kind = mx::simplex::parse_partition_kind(strategy);
    params.strategy.rng_seed = strategy_seed;
    params.schedule = mx::sgd::StepSchedule::parse(schedule, c.mu, default_E);
    params.nu2 = nu2 > 0 ? nu2 : c.nu2;
    params.rho2 = rho2 > 0 ? rho2 : c.rho2;
    params.seed = seed;
    params.widen_final_pool = widen_final_pool != 0;
    *out = new mm_search_result{
        mx::treesearch::mix_and_match(suite->impl, params)};
    return MM_OK;
  });
}

int mm_search_result_num_sources(const mm_search_result* result) {
  return result ? static_cast<int>(result->impl.alpha.size()) : 0;
}

mm_status mm_search_result_alpha(const mm_search_result* result, double* buf,
                                 int cap) {
  if (mm_status s = require(result && buf, "mm_search_result_alpha: null argument");
      s != MM_OK)
    return s;
  const auto& alpha = result->impl.alpha;
  if (cap < static_cast<int>(alpha.size()))
    return fail(MM_ERR_INVALID_ARGUMENT, "mm_search_result_alpha: buffer too small");
  for (size_t i = 0; i < alpha.size(); ++i) buf[i] = alpha[i];
  return MM_OK;
}

int mm_search_result_height(const mm_search_result* result) {
  return result ? result->impl.height_final : 0;
}

uint64_t mm_search_result_total_steps(const mm_search_result* result) {
  return result ? result->impl.total_steps : 0;
}

uint64_t mm_search_result_node_count(const mm_search_result* result) {
  return result ? result->impl.node_count : 0;
}

mm_status mm_search_write_outputs(const mm_suite* suite,
                                  const mm_search_result* result,
                                  const char* out_dir) {
  if (mm_status s = require(suite && result && out_dir,
                            "mm_search_write_outputs: null argument");
      s != MM_OK)
    return s;
  return guarded([&] {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    mx::harness::write_search_csv(result->impl, dir / "search.csv");
    mx::harness::write_result_csv(
        mx::harness::mixture_json(result->impl.alpha), result->impl.height_final,
        result->impl.total_steps, known_regret(suite->impl, result->impl.model.w),
        dir / "result.csv");
    return MM_OK;
  });
}

void mm_search_result_close(mm_search_result* result) { delete result; }

/* -------------------------------------------------------------- baselines */

mm_status mm_baseline_run(const mm_suite* suite, const char* kind,
                          uint64_t budget, const char* schedule, uint64_t seed,
                          const char* out_dir, double* regret_out) {
  if (mm_status s = require(suite && kind && schedule && out_dir,
                            "mm_baseline_run: null argument");
      s != MM_OK)
    return s;
  if (regret_out) *regret_out = std::numeric_limits<double>::quiet_NaN();
  return guarded([&] {
    const mx::baselines::BaselineKind parsed = mx::baselines::BaselineKind::parse(kind);
    const mx::problems::Constants& c = suite->impl.constants();
    const double default_E =
        budget > 1 ? mx::sgd::compute_E(std::max(c.kappa, 1.0),
                                        static_cast<double>(budget))
                   : 1.0;
    const mx::sgd::StepSchedule sched =
        mx::sgd::StepSchedule::parse(schedule, c.mu, default_E);
    const mx::baselines::BaselineResult res =
        mx::baselines::run_baseline(parsed, suite->impl, budget, sched, seed);
    const std::optional<double> regret = known_regret(suite->impl, res.model.w);
    if (regret && regret_out) *regret_out = *regret;
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    const std::string alpha_field =
        res.alpha.empty() ? res.tag : mx::harness::mixture_json(res.alpha);
    mx::harness::write_result_csv(alpha_field, 0, res.total_steps, regret,
                                  dir / "result.csv");
    return MM_OK;
  });
}

/* ------------------------------------------------------------ validations */

mm_status mm_verify_smoothness(const mm_suite* suite, int pairs, uint64_t seed,
                               const char* csv_path, int* violations_model,
                               int* violations_value) {
  if (mm_status s = require(suite != nullptr, "mm_verify_smoothness: null suite");
      s != MM_OK)
    return s;
  return guarded([&]() -> mm_status {
    const mx::harness::SmoothnessReport rep =
        mx::harness::verify_smoothness(suite->impl, pairs, seed);
    if (csv_path) mx::harness::write_smoothness_csv(rep, csv_path);
    if (violations_model) *violations_model = rep.violations_model;
    if (violations_value) *violations_value = rep.violations_value;
    if (!rep.pass())
      return fail(MM_ERR_CHECK_FAILED,
                  "smoothness violated on " +
                      std::to_string(rep.violations_model + rep.violations_value) +
                      " of " + std::to_string(rep.pairs) + " pairs");
    return MM_OK;
  });
}

mm_status mm_verify_sgd(const mm_suite* suite, uint64_t t_max,
                        double lambda_budget, int replicas, int k,
                        uint64_t seed, double schedule_E, double diameter,
                        const char* csv_path, uint64_t* bad_points) {
  if (mm_status s = require(suite != nullptr, "mm_verify_sgd: null suite");
      s != MM_OK)
    return s;
  return guarded([&]() -> mm_status {
    mx::harness::ConcentrationOptions opt;
    opt.t_max = t_max;
    opt.lambda_budget = lambda_budget;
    opt.replicas = replicas;
    opt.k = k;
    opt.seed = seed;
    if (schedule_E > 0) opt.schedule_E = schedule_E;
    if (diameter > 0) opt.diameter = diameter;
    const mx::harness::ConcentrationReport rep =
        mx::harness::verify_concentration(suite->impl, opt);
    if (csv_path) mx::harness::write_concentration_csv(rep, csv_path);
    uint64_t bad = 0;
    for (const auto& pt : rep.points)
      if (!pt.ok) ++bad;
    if (bad_points) *bad_points = bad;
    if (!rep.pass)
      return fail(MM_ERR_CHECK_FAILED,
                  "concentration bound violated at " + std::to_string(bad) +
                      " grid points");
    return MM_OK;
  });
}

mm_status mm_partition_demo(int k, int height, const char* strategy,
                            uint64_t strategy_seed, const char* csv_path) {
  if (mm_status s = require(strategy && csv_path, "mm_partition_demo: null argument");
      s != MM_OK)
    return s;
  return guarded([&] {
    mx::simplex::PartitionStrategy strat;
    strat.kind = mx::simplex::parse_partition_kind(strategy);
    strat.rng_seed = strategy_seed;
    mx::harness::write_partition_demo_csv(k, height, strat, csv_path);
    return MM_OK;
  });
}

mm_status mm_ingest_check(const char* config_path, const char* counts_csv) {
  if (mm_status s = require(config_path != nullptr, "mm_ingest_check: null config");
      s != MM_OK)
    return s;
  return guarded([&] {
    const mx::config::Config cfg = mx::config::Config::load(config_path);
    if (cfg.str_or("kind", "synthetic") != "ingest")
      throw std::invalid_argument("mm_ingest_check: config is not kind = ingest");
    const mx::harness::IngestSpec spec = mx::harness::parse_ingest_spec(cfg);
    mx::harness::IngestReport report;
    mx::harness::ingest_csv(spec, &report);
    if (counts_csv) mx::harness::write_ingest_counts_csv(report, counts_csv);
    return MM_OK;
  });
}

/* ------------------------------------------------------------- experiment */

mm_status mm_experiment_run(const char* config_path, const char* out_dir) {
  if (mm_status s = require(config_path && out_dir, "mm_experiment_run: null argument");
      s != MM_OK)
    return s;
  return guarded([&] {
    const mx::config::Config cfg = mx::config::Config::load(config_path);
    const mx::harness::ExperimentConfig parsed =
        mx::harness::parse_experiment_config(cfg);
    mx::harness::run_experiment(parsed, out_dir);
    return MM_OK;
  });
}

} /* extern "C" */
