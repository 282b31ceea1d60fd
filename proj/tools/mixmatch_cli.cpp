// Command-line front end over the C API. Every subcommand maps onto one
// mm_* entry point; all file artifacts come out of the library so repeated
// invocations with the same arguments are byte-identical.
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mixmatch/mixmatch.h"

namespace {

// 0 on success, 2 when a verification found violations, 1 otherwise.
int finish(mm_status status) {
  if (status == MM_OK) return 0;
  if (status == MM_ERR_CHECK_FAILED) {
    std::cerr << "check failed: " << mm_last_error() << "\n";
    return 2;
  }
  std::cerr << "error: " << mm_last_error() << "\n";
  return 1;
}

using SuiteHandle = std::unique_ptr<mm_suite, decltype(&mm_suite_close)>;

SuiteHandle open_suite(const std::string& path, mm_status* status) {
  mm_suite* raw = nullptr;
  *status = mm_suite_open(path.c_str(), &raw);
  return SuiteHandle(raw, &mm_suite_close);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"budgeted search for a training-source mixture"};
  app.require_subcommand(1);

  std::string suite_path, out_path, strategy = "bisect", schedule = "theoretical";
  std::string kind, config_path;
  uint64_t budget = 0, node_steps = 500, seed = 0, strategy_seed = 0, t_max = 100000;
  double nu2 = 0, rho2 = 0, lambda_budget = 0, schedule_E = 0, diameter = 0;
  int pairs = 1000, replicas = 200, bound_k = 0, k = 2, height = 3;
  bool widen = false;

  auto* run = app.add_subcommand("run", "tree search under a step budget");
  run->add_option("--suite", suite_path, "suite config file")->required();
  run->add_option("--budget", budget, "total SGD step budget")->required();
  run->add_option("--node-steps", node_steps, "SGD steps per trained node");
  run->add_option("--strategy", strategy, "bisect | coordhalf");
  run->add_option("--strategy-seed", strategy_seed, "partition randomness seed");
  run->add_option("--schedule", schedule,
                  "theoretical | theoretical:<E> | practical:<eta>");
  run->add_option("--nu2", nu2, "exploration constant (default: suite)");
  run->add_option("--rho2", rho2, "exploration decay (default: suite)");
  run->add_option("--seed", seed, "search randomness seed");
  run->add_flag("--widen-final-pool", widen, "pick the answer among all leaves");
  run->add_option("--out", out_path, "output directory")->required();

  auto* base = app.add_subcommand("baseline", "fixed-policy training run");
  base->add_option("--suite", suite_path, "suite config file")->required();
  base->add_option("--kind", kind, "genie | uniform | validation | only:<i>")
      ->required();
  base->add_option("--budget", budget, "total SGD step budget")->required();
  base->add_option("--schedule", schedule,
                   "theoretical | theoretical:<E> | practical:<eta>");
  base->add_option("--seed", seed, "stream seed");
  base->add_option("--out", out_path, "output directory")->required();

  auto* smooth = app.add_subcommand("verify-smoothness",
                                    "optimal-model and value smoothness check");
  smooth->add_option("--suite", suite_path, "suite config file")->required();
  smooth->add_option("--pairs", pairs, "random mixture pairs");
  smooth->add_option("--seed", seed, "pair stream seed");
  smooth->add_option("--out", out_path, "report CSV path");

  auto* conc = app.add_subcommand("verify-sgd",
                                  "SGD distance concentration check");
  conc->add_option("--suite", suite_path, "suite config file")->required();
  conc->add_option("--t-max", t_max, "longest run length");
  conc->add_option("--budget", lambda_budget,
                   "confidence budget (default: t-max + 1)");
  conc->add_option("--replicas", replicas, "independent runs");
  conc->add_option("--k", bound_k, "variance recursion rounds in the bound");
  conc->add_option("--seed", seed, "replica stream seed");
  conc->add_option("--schedule-E", schedule_E,
                   "run schedule offset (default: the bound's own)");
  conc->add_option("--diameter", diameter,
                   "iterate-distance envelope (default: derived)");
  conc->add_option("--out", out_path, "report CSV path");

  auto* part = app.add_subcommand("partition-demo",
                                  "expand the simplex partition tree");
  part->add_option("--k", k, "number of sources")->required();
  part->add_option("--height", height, "tree height to expand to")->required();
  part->add_option("--strategy", strategy, "bisect | coordhalf");
  part->add_option("--strategy-seed", strategy_seed, "partition randomness seed");
  part->add_option("--out", out_path, "cells CSV path")->required();

  auto* ingest = app.add_subcommand("ingest-check",
                                    "run a CSV split and report counts");
  ingest->add_option("--suite", suite_path, "kind=ingest config file")->required();
  ingest->add_option("--out", out_path, "per-source counts CSV path");

  auto* manifest = app.add_subcommand("manifest", "write the suite constants");
  manifest->add_option("--suite", suite_path, "suite config file")->required();
  manifest->add_option("--out", out_path, "constants CSV path")->required();

  auto* exp = app.add_subcommand("experiment",
                                 "algorithm x budget x replica grid");
  exp->add_option("--config", config_path, "experiment config file")->required();
  exp->add_option("--out", out_path, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    mm_status status;
    SuiteHandle suite = open_suite(suite_path, &status);
    if (status != MM_OK) return finish(status);
    mm_search_result* result = nullptr;
    status = mm_search_run(suite.get(), budget, node_steps, strategy.c_str(),
                           strategy_seed, schedule.c_str(), nu2, rho2, seed,
                           widen ? 1 : 0, &result);
    if (status != MM_OK) return finish(status);
    std::unique_ptr<mm_search_result, decltype(&mm_search_result_close)> guard(
        result, &mm_search_result_close);
    status = mm_search_write_outputs(suite.get(), result, out_path.c_str());
    if (status != MM_OK) return finish(status);
    std::vector<double> alpha(mm_search_result_num_sources(result));
    mm_search_result_alpha(result, alpha.data(), static_cast<int>(alpha.size()));
    std::cout << "alpha [";
    for (size_t i = 0; i < alpha.size(); ++i)
      std::cout << (i ? "," : "") << fmt(alpha[i]);
    std::cout << "]\nheight " << mm_search_result_height(result)
              << "\ntotal_steps " << mm_search_result_total_steps(result)
              << "\nnodes " << mm_search_result_node_count(result) << "\n";
    return 0;
  }

  if (*base) {
    mm_status status;
    SuiteHandle suite = open_suite(suite_path, &status);
    if (status != MM_OK) return finish(status);
    double regret = 0;
    status = mm_baseline_run(suite.get(), kind.c_str(), budget, schedule.c_str(),
                             seed, out_path.c_str(), &regret);
    if (status != MM_OK) return finish(status);
    if (regret == regret)  // NaN when the suite has no closed-form optimum
      std::cout << "regret " << fmt(regret) << "\n";
    std::cout << "total_steps " << budget << "\n";
    return 0;
  }

  if (*smooth) {
    mm_status status;
    SuiteHandle suite = open_suite(suite_path, &status);
    if (status != MM_OK) return finish(status);
    int bad_model = 0, bad_value = 0;
    status = mm_verify_smoothness(suite.get(), pairs, seed,
                                  out_path.empty() ? nullptr : out_path.c_str(),
                                  &bad_model, &bad_value);
    std::cout << "pairs " << pairs << "\nviolations_model " << bad_model
              << "\nviolations_value " << bad_value << "\n";
    return finish(status);
  }

  if (*conc) {
    mm_status status;
    SuiteHandle suite = open_suite(suite_path, &status);
    if (status != MM_OK) return finish(status);
    uint64_t bad = 0;
    status = mm_verify_sgd(suite.get(), t_max,
                           lambda_budget > 0 ? lambda_budget
                                             : static_cast<double>(t_max) + 1.0,
                           replicas, bound_k, seed, schedule_E, diameter,
                           out_path.empty() ? nullptr : out_path.c_str(), &bad);
    std::cout << "replicas " << replicas << "\nbad_points " << bad << "\n";
    return finish(status);
  }

  if (*part)
    return finish(mm_partition_demo(k, height, strategy.c_str(), strategy_seed,
                                    out_path.c_str()));

  if (*ingest)
    return finish(mm_ingest_check(suite_path.c_str(),
                                  out_path.empty() ? nullptr : out_path.c_str()));

  if (*manifest) {
    mm_status status;
    SuiteHandle suite = open_suite(suite_path, &status);
    if (status != MM_OK) return finish(status);
    return finish(mm_suite_write_manifest(suite.get(), out_path.c_str()));
  }

  if (*exp) return finish(mm_experiment_run(config_path.c_str(), out_path.c_str()));

  return 0;
}
