// Harness layer: ingestion, regret oracles, theorem drivers, experiments.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/harness.hpp"
#include "core/problems.hpp"
#include "core/rng.hpp"
#include "core/textio.hpp"
#include <doctest.h>

using namespace mixmatch;
namespace fs = std::filesystem;

namespace {

fs::path config_dir() { return fs::path(MIXMATCH_CONFIG_DIR); }

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "mixmatch_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Ten uniquely numbered rows in two sources; numeric column `num`,
// categorical column `cat`, label `val` = 10 * num.
const char* kFixtureCsv =
    "src,num,cat,val\n"
    "s1,1,a,10\n"
    "s1,2,b,20\n"
    "s1,3,a,30\n"
    "s1,4,b,40\n"
    "s1,5,a,50\n"
    "s1,6,b,60\n"
    "s2,7,b,70\n"
    "s2,8,a,80\n"
    "s2,9,b,90\n"
    "s2,10,a,100\n";

const char* kFixtureCfg =
    "kind = ingest\n"
    "csv = small.csv\n"
    "source_column = src\n"
    "label_column = val\n"
    "loss = quadratic\n"
    "seed = 5\n"
    "split.s1 = 50 25 25 0\n"
    "split.s2 = 25 25 0 50\n";

fs::path write_ingest_fixture(const fs::path& dir) {
  std::ofstream(dir / "small.csv") << kFixtureCsv;
  std::ofstream(dir / "ingest.cfg") << kFixtureCfg;
  return dir / "ingest.cfg";
}

// Expected encoding of fixture row `num`: [num, cat==a, cat==b], label 10num.
Eigen::VectorXd fixture_features(int num) {
  const std::set<int> cat_a = {1, 3, 5, 8, 10};
  Eigen::VectorXd x(3);
  x << num, cat_a.count(num) ? 1.0 : 0.0, cat_a.count(num) ? 0.0 : 1.0;
  return x;
}

std::set<int> nums_of(const std::vector<problems::Sample>& rows) {
  std::set<int> out;
  for (const problems::Sample& z : rows)
    out.insert(static_cast<int>(std::llround(z.x[0])));
  return out;
}

harness::Mixture random_mixture(rng::Stream& stream, int k) {
  harness::Mixture alpha(static_cast<size_t>(k));
  double sum = 0;
  for (double& a : alpha) {
    a = -std::log(stream.next_unit());
    sum += a;
  }
  for (double& a : alpha) a /= sum;
  return alpha;
}

problems::Sample scalar_row(double x, double y) {
  problems::Sample z;
  z.x = Eigen::VectorXd::Constant(1, x);
  z.y = y;
  return z;
}

}  // namespace

TEST_CASE("ingest spec parsing reads the split table") {
  const config::Config cfg = config::Config::parse(kFixtureCfg, "/data/x.cfg");
  const harness::IngestSpec spec = harness::parse_ingest_spec(cfg);
  CHECK(spec.csv == fs::path("/data/small.csv"));
  CHECK(spec.source_column == "src");
  CHECK(spec.label_column == "val");
  CHECK(spec.seed == 5);
  REQUIRE(spec.splits.size() == 2);
  CHECK(spec.splits[0].first == "s1");
  CHECK(spec.splits[0].second == std::array<double, 4>{50, 25, 25, 0});
  CHECK(spec.splits[1].first == "s2");

  CHECK_THROWS_AS((void)harness::parse_ingest_spec(config::Config::parse(
                      "csv = a\nsource_column = s\nlabel_column = l\nseed = 1\n")),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      (void)harness::parse_ingest_spec(config::Config::parse(
          "csv = a\nsource_column = s\nlabel_column = l\nseed = 1\n"
          "split.s1 = 50 50\n")),
      std::invalid_argument);
}

TEST_CASE("ingestion splits by floored percentages with remainder to train") {
  const fs::path dir = fresh_dir("ingest_basic");
  const fs::path cfg_path = write_ingest_fixture(dir);
  const harness::IngestSpec spec =
      harness::parse_ingest_spec(config::Config::load(cfg_path));
  harness::IngestReport report;
  const problems::Suite s = harness::ingest_csv(spec, &report);

  REQUIRE(report.sources.size() == 2);
  CHECK(report.sources[0].source == "s1");
  CHECK(report.sources[0].total == 6);
  CHECK(report.sources[0].train == 4);  // floor gives 3, remainder adds 1
  CHECK(report.sources[0].validate == 1);
  CHECK(report.sources[0].test == 1);
  CHECK(report.sources[0].discard == 0);
  CHECK(report.sources[1].source == "s2");
  CHECK(report.sources[1].total == 4);
  CHECK(report.sources[1].train == 1);
  CHECK(report.sources[1].validate == 1);
  CHECK(report.sources[1].test == 0);
  CHECK(report.sources[1].discard == 2);
  CHECK(report.feature_dim == 3);

  CHECK(s.num_sources() == 2);
  CHECK(s.x_dim() == 3);
  CHECK_FALSE(s.is_synthetic());
  CHECK(s.validation_set().size() == 2);
  CHECK(s.test_set().size() == 1);
}

TEST_CASE("ingestion one-hot encodes and keeps rows intact") {
  const fs::path dir = fresh_dir("ingest_rows");
  const fs::path cfg_path = write_ingest_fixture(dir);
  const problems::Suite s = harness::load_suite(cfg_path);

  std::vector<problems::Sample> held = s.validation_set();
  held.insert(held.end(), s.test_set().begin(), s.test_set().end());
  for (const problems::Sample& z : held) {
    const int num = static_cast<int>(std::llround(z.x[0]));
    REQUIRE(num >= 1);
    REQUIRE(num <= 10);
    CHECK((z.x - fixture_features(num)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(z.y == 10.0 * num);
  }
}

TEST_CASE("ingestion partitions each source without loss or overlap") {
  const fs::path dir = fresh_dir("ingest_partition");
  const fs::path cfg_path = write_ingest_fixture(dir);
  const problems::Suite s = harness::load_suite(cfg_path);

  // Training rows are only reachable through resampling; 120 draws miss one
  // of four rows with probability < 1e-13.
  problems::SampleStream stream(1);
  std::vector<problems::Sample> draws0, draws1;
  for (int i = 0; i < 120; ++i) draws0.push_back(s.draw_from_source(0, stream));
  for (int i = 0; i < 40; ++i) draws1.push_back(s.draw_from_source(1, stream));
  const std::set<int> train0 = nums_of(draws0);
  const std::set<int> train1 = nums_of(draws1);

  std::vector<problems::Sample> held = s.validation_set();
  held.insert(held.end(), s.test_set().begin(), s.test_set().end());
  std::set<int> held0, held1;
  for (int n : nums_of(held)) (n <= 6 ? held0 : held1).insert(n);

  // Source s1: 4 train + 1 validate + 1 test covers all six rows exactly.
  CHECK(train0.size() == 4);
  CHECK(held0.size() == 2);
  for (int n : train0) {
    CHECK(n >= 1);
    CHECK(n <= 6);
    CHECK(held0.count(n) == 0);
  }
  // Source s2 trains on exactly one row, disjoint from the held-out one.
  CHECK(train1.size() == 1);
  CHECK(held1.size() == 1);
  for (int n : train1) {
    CHECK(n >= 7);
    CHECK(held1.count(n) == 0);
  }
}

TEST_CASE("ingestion is deterministic and reseeds through the override") {
  const fs::path dir = fresh_dir("ingest_seed");
  const fs::path cfg_path = write_ingest_fixture(dir);
  const problems::Suite a = harness::load_suite(cfg_path);
  const problems::Suite b = harness::load_suite(cfg_path);
  REQUIRE(a.validation_set().size() == b.validation_set().size());
  for (size_t i = 0; i < a.validation_set().size(); ++i)
    CHECK(a.validation_set()[i].x == b.validation_set()[i].x);

  const problems::Suite c = harness::load_suite(cfg_path, 999);
  const problems::Suite d = harness::load_suite(cfg_path, 1000);
  const std::set<int> base = nums_of(a.validation_set());
  CHECK((nums_of(c.validation_set()) != base ||
         nums_of(d.validation_set()) != base));
}

TEST_CASE("ingestion rejects inconsistent inputs") {
  const fs::path dir = fresh_dir("ingest_errors");
  write_ingest_fixture(dir);
  const std::string origin = (dir / "x.cfg").string();
  auto spec_with = [&](const std::string& extra) {
    std::string text =
        "csv = small.csv\nsource_column = src\nlabel_column = val\nseed = 1\n";
    text += extra;
    return harness::parse_ingest_spec(config::Config::parse(text, origin));
  };

  // Percentages off by more than the tolerance.
  CHECK_THROWS_AS(
      (void)harness::ingest_csv(spec_with("split.s1 = 50 25 24 0\n"
                                          "split.s2 = 25 25 0 50\n")),
      std::invalid_argument);
  // A CSV source value without a split entry.
  CHECK_THROWS_AS((void)harness::ingest_csv(spec_with("split.s1 = 100 0 0 0\n")),
                  std::invalid_argument);

  auto named_spec = [&](const std::string& src_col, const std::string& label_col) {
    std::string text = "csv = small.csv\nsource_column = " + src_col +
                       "\nlabel_column = " + label_col +
                       "\nseed = 1\nsplit.s1 = 50 25 25 0\nsplit.s2 = 25 25 0 50\n";
    return harness::parse_ingest_spec(config::Config::parse(text, origin));
  };
  CHECK_THROWS_AS((void)harness::ingest_csv(named_spec("nosuch", "val")),
                  std::invalid_argument);
  // Labels must be numeric; `cat` is not.
  CHECK_THROWS_AS((void)harness::ingest_csv(named_spec("src", "cat")),
                  std::invalid_argument);

  std::ofstream(dir / "empty.csv") << "src,num,cat,val\n";
  const harness::IngestSpec empty_spec = harness::parse_ingest_spec(
      config::Config::parse("csv = empty.csv\nsource_column = src\n"
                            "label_column = val\nseed = 1\n"
                            "split.s1 = 100 0 0 0\n",
                            origin));
  CHECK_THROWS_AS((void)harness::ingest_csv(empty_spec), std::invalid_argument);
}

TEST_CASE("suite loading dispatches on the config kind") {
  const problems::Suite synthetic =
      harness::load_suite(config_dir() / "suite_scalar.cfg");
  CHECK(synthetic.is_synthetic());
  CHECK(synthetic.seed() == 7);
  CHECK(harness::load_suite(config_dir() / "suite_scalar.cfg", 123).seed() == 123);

  const fs::path dir = fresh_dir("load_kind");
  std::ofstream(dir / "bad.cfg") << "kind = magic\n";
  CHECK_THROWS_AS((void)harness::load_suite(dir / "bad.cfg"),
                  std::invalid_argument);
}

TEST_CASE("regret oracle solves the scalar suite exactly") {
  const problems::Suite s = harness::load_suite(config_dir() / "suite_scalar.cfg");
  const harness::RegretOracle oracle(s);
  CHECK(oracle.exact());
  CHECK(oracle.has_min());
  CHECK(oracle.g_min() == 0.625);  // half the mixture variance at the target
  REQUIRE(oracle.minimizer().size() == 2);
  CHECK(oracle.minimizer()[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(oracle.g_of({1.0, 0.0}) == 0.75);
  CHECK(oracle.simple_regret(s.alpha_star()) == 0.0);
  CHECK(oracle.simple_regret({1.0, 0.0}) == 0.125);
  CHECK(oracle.test_loss(Eigen::VectorXd::Constant(1, 1.0)) == 0.75);
  CHECK(oracle.model_regret(Eigen::VectorXd::Constant(1, 1.0)) == 0.125);
  CHECK(oracle.model_regret(Eigen::VectorXd::Constant(1, 0.5)) == 0.0);
}

TEST_CASE("regret oracle never reports negative regret on quadratic suites") {
  const problems::Suite s = harness::load_suite(config_dir() / "suite_scalar.cfg");
  const harness::RegretOracle oracle(s);
  rng::Stream stream(88);
  for (int i = 0; i < 500; ++i) {
    CHECK(oracle.simple_regret(random_mixture(stream, 2)) >= 0.0);
  }
}

TEST_CASE("regret oracle recovers the interior minimizer of the latent suite") {
  const problems::Suite s =
      harness::load_suite(config_dir() / "suite_latent_k3.cfg");
  const harness::RegretOracle oracle(s);
  CHECK(oracle.exact());
  REQUIRE(oracle.minimizer().size() == 3);
  CHECK(oracle.minimizer()[0] == doctest::Approx(0.6).epsilon(1e-5));
  CHECK(oracle.minimizer()[1] == doctest::Approx(0.3).epsilon(1e-5));
  CHECK(oracle.minimizer()[2] == doctest::Approx(0.1).epsilon(1e-5));
  const double at_star = oracle.simple_regret(s.alpha_star());
  CHECK(at_star >= 0.0);
  CHECK(at_star <= 1e-9);
}

TEST_CASE("regret oracle handles ingested suites through the test split") {
  std::vector<std::vector<problems::Sample>> train;
  train.push_back({scalar_row(0.0, 0), scalar_row(2.0, 0)});   // mean 1
  train.push_back({scalar_row(1.0, 0), scalar_row(3.0, 0)});   // mean 2
  std::vector<problems::Sample> validation = {scalar_row(1.0, 0)};
  std::vector<problems::Sample> test = {scalar_row(0.5, 0)};
  const problems::Suite s =
      problems::Suite::ingested(std::move(train), std::move(validation),
                                std::move(test), problems::LossKind::kQuadratic,
                                0.0, 100, 100);
  const harness::RegretOracle oracle(s);
  CHECK(oracle.has_min());
  // Means span [1, 2]; the test point 0.5 pulls the minimizer to the corner.
  CHECK(oracle.minimizer()[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(oracle.g_min() == doctest::Approx(0.125).epsilon(1e-6));
  CHECK(oracle.simple_regret({1.0, 0.0}) <= 1e-9);
  rng::Stream stream(17);
  for (int i = 0; i < 200; ++i)
    CHECK(oracle.simple_regret(random_mixture(stream, 2)) >= -1e-9);
}

TEST_CASE("module-level simple regret matches a fresh oracle") {
  const problems::Suite s = harness::load_suite(config_dir() / "suite_scalar.cfg");
  CHECK(harness::simple_regret(s, {1.0, 0.0}) == 0.125);
}

TEST_CASE("smoothness verification passes on quadratic suites") {
  const problems::Suite s = harness::load_suite(config_dir() / "suite_scalar.cfg");
  const harness::SmoothnessReport rep = harness::verify_smoothness(s, 300, 2);
  CHECK(rep.pairs == 300);
  CHECK(rep.violations_model == 0);
  CHECK(rep.violations_value == 0);
  CHECK(rep.pass());
  CHECK(rep.max_ratio_model <= 1.0 + 1e-9);
  CHECK(rep.max_ratio_value <= 1.0 + 1e-9);
  CHECK(rep.max_ratio_model > 0.0);
}

TEST_CASE("smoothness verification needs closed-form optima") {
  problems::SyntheticConfig cfg;
  cfg.x_dim = 1;
  cfg.loss = problems::LossKind::kRidgeLogistic;
  cfg.ridge_lambda = 0.1;
  problems::SyntheticSource src;
  src.mean = Eigen::VectorXd::Constant(1, 0.3);
  src.cov = Eigen::MatrixXd::Identity(1, 1);
  cfg.sources = {src, src};
  cfg.conditional.coef_x = Eigen::VectorXd::Constant(1, 1.0);
  cfg.conditional.binarize = true;
  cfg.alpha_star = {0.5, 0.5};
  cfg.validation_size = 20;
  cfg.seed = 4;
  const problems::Suite s = problems::Suite::synthetic(cfg);
  CHECK_THROWS_AS((void)harness::verify_smoothness(s, 10, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)harness::verify_concentration(s, {}),
                  std::invalid_argument);
}

TEST_CASE("concentration verification tracks the bound on a small grid") {
  const problems::Suite s = harness::load_suite(config_dir() / "suite_scalar.cfg");
  harness::ConcentrationOptions opt;
  opt.t_max = 2000;
  opt.lambda_budget = 100001;
  opt.replicas = 16;
  opt.k = 0;
  opt.seed = 3;
  opt.schedule_E = 100.0;
  const harness::ConcentrationReport rep = harness::verify_concentration(s, opt);
  CHECK(rep.replicas == 16);
  CHECK(rep.schedule_E == 100.0);
  REQUIRE(rep.points.size() >= 3);
  CHECK(rep.points.front().t == 0);
  CHECK(rep.points.back().t == 2000);
  for (size_t i = 1; i < rep.points.size(); ++i)
    CHECK(rep.points[i].t > rep.points[i - 1].t);
  for (const harness::ConcentrationPoint& pt : rep.points) {
    CHECK(pt.bound_total > 0);
    CHECK(std::isfinite(pt.mean_dsq));
    CHECK(pt.p99_dsq >= pt.median_dsq);
    CHECK(pt.ok);
  }
  CHECK(rep.pass);
  // Training converges, so the median distance shrinks along the grid.
  CHECK(rep.points.back().median_dsq < rep.points.front().median_dsq);
  // The distance starts at |w*|^2 = 0.25 for every replica.
  CHECK(rep.points.front().mean_dsq == 0.25);
}

TEST_CASE("concentration verification validates its options") {
  const problems::Suite s = harness::load_suite(config_dir() / "suite_scalar.cfg");
  harness::ConcentrationOptions opt;
  opt.t_max = 100;
  opt.lambda_budget = 50;  // must cover t_max + 1
  CHECK_THROWS_AS((void)harness::verify_concentration(s, opt),
                  std::invalid_argument);
  opt.lambda_budget = 101;
  opt.replicas = 0;
  CHECK_THROWS_AS((void)harness::verify_concentration(s, opt),
                  std::invalid_argument);
  opt.replicas = 2;
  opt.grid = {0, 50, 200};  // beyond t_max
  CHECK_THROWS_AS((void)harness::verify_concentration(s, opt),
                  std::invalid_argument);
  opt.grid = {0, 50, 100};
  const harness::ConcentrationReport rep = harness::verify_concentration(s, opt);
  CHECK(rep.points.size() == 3);
  CHECK(rep.points[1].t == 50);
}

TEST_CASE("experiment configs parse with defaults and validation") {
  const std::string origin = (config_dir() / "x.cfg").string();
  const config::Config cfg = config::Config::parse(
      "suite = suite_scalar.cfg\nalgorithms = mixmatch genie uniform\n"
      "lambdas = 100 200\n",
      origin);
  const harness::ExperimentConfig out = harness::parse_experiment_config(cfg);
  CHECK(out.suite_config == config_dir() / "suite_scalar.cfg");
  CHECK(out.algorithms == std::vector<std::string>{"mixmatch", "genie", "uniform"});
  CHECK(out.lambdas == std::vector<uint64_t>{100, 200});
  CHECK(out.replicas == 10);
  CHECK(out.node_steps == 500);
  CHECK(out.schedule_spec == "practical:0.05");
  CHECK(out.strategy.kind == simplex::PartitionKind::kLongestEdgeBisection);
  CHECK_FALSE(out.widen_final_pool);
  CHECK(out.threads == 0);
  CHECK_FALSE(out.nu2.has_value());

  auto reject = [&](const std::string& text) {
    CHECK_THROWS_AS(
        (void)harness::parse_experiment_config(config::Config::parse(text, origin)),
        std::exception);
  };
  reject("suite = suite_scalar.cfg\nalgorithms = sorcery\nlambdas = 10\n");
  reject("suite = suite_scalar.cfg\nalgorithms = mixmatch\nlambdas = 0.5\n");
  reject("suite = suite_scalar.cfg\nalgorithms = mixmatch\nlambdas = 10\nreplicas = 0\n");
  reject("suite = suite_scalar.cfg\nlambdas = 10\n");
}

TEST_CASE("experiments sweep the grid and write paired artifacts") {
  harness::ExperimentConfig cfg;
  cfg.suite_config = config_dir() / "suite_scalar.cfg";
  cfg.algorithms = {"mixmatch", "uniform", "genie"};
  cfg.lambdas = {40, 80};
  cfg.replicas = 2;
  cfg.master_seed = 5;
  cfg.node_steps = 10;
  cfg.schedule_spec = "practical:0.1";
  cfg.nu2 = 0.1;
  cfg.rho2 = 0.5;
  cfg.threads = 2;

  const fs::path out_a = fresh_dir("experiment_a");
  const harness::ExperimentReport rep = harness::run_experiment(cfg, out_a);
  REQUIRE(rep.cells.size() == 12);
  CHECK(rep.cells[0].algorithm == "genie");  // sorted by name
  CHECK(rep.cells[0].lambda == 40);
  CHECK(rep.cells[0].replica == 0);
  CHECK(rep.cells[11].algorithm == "uniform");

  std::map<std::pair<uint64_t, int>, int> mixmatch_heights;
  for (const harness::CellResult& cell : rep.cells) {
    CHECK_FALSE(cell.failed);
    CHECK(cell.regret >= 0.0);
    CHECK(std::isfinite(cell.regret));
    if (cell.algorithm == "mixmatch") {
      CHECK(cell.h_final >= 1);
      CHECK(cell.total_steps > cell.lambda);
      CHECK(cell.total_steps <= cell.lambda + 2 * cfg.node_steps);
      mixmatch_heights[{cell.lambda, cell.replica}] = cell.h_final;
    } else {
      CHECK(cell.h_final == 0);
      CHECK(cell.total_steps == cell.lambda);
    }
  }
  // Budgets share the seed, so the deeper run extends the shallow one.
  for (int r = 0; r < 2; ++r)
    CHECK(mixmatch_heights[{40, r}] <= mixmatch_heights[{80, r}]);

  const auto curve = textio::read_csv(out_a / "regret_curve.csv");
  REQUIRE(curve.size() == 13);
  CHECK(curve[0] == std::vector<std::string>{"algorithm", "lambda", "seed",
                                             "regret", "h_final", "total_steps"});
  const auto summary = textio::read_csv(out_a / "summary.csv");
  REQUIRE(summary.size() == 7);
  CHECK(summary[0][0] == "algorithm");
  for (size_t i = 1; i < summary.size(); ++i) {
    CHECK(summary[i][2] == "2");  // replicas
    CHECK(summary[i][7] == "0");  // failures
  }
  const auto errors = textio::read_csv(out_a / "errors.csv");
  CHECK(errors.size() == 1);

  // Replays are byte-identical.
  const fs::path out_b = fresh_dir("experiment_b");
  (void)harness::run_experiment(cfg, out_b);
  for (const char* name : {"regret_curve.csv", "summary.csv", "errors.csv"})
    CHECK(slurp(out_a / name) == slurp(out_b / name));
}

TEST_CASE("failed experiment cells are quarantined in errors.csv") {
  const fs::path dir = fresh_dir("experiment_fail");
  const fs::path suite_cfg = write_ingest_fixture(dir);

  harness::ExperimentConfig cfg;
  cfg.suite_config = suite_cfg;
  cfg.algorithms = {"genie", "uniform"};  // genie needs a known best mixture
  cfg.lambdas = {30};
  cfg.replicas = 2;
  cfg.master_seed = 1;
  cfg.schedule_spec = "practical:0.05";
  cfg.threads = 1;

  const fs::path out = dir / "out";
  const harness::ExperimentReport rep = harness::run_experiment(cfg, out);
  REQUIRE(rep.cells.size() == 4);
  int failed = 0;
  for (const harness::CellResult& cell : rep.cells) {
    if (cell.algorithm == "genie") {
      CHECK(cell.failed);
      CHECK_FALSE(cell.error.empty());
      ++failed;
    } else {
      CHECK_FALSE(cell.failed);
    }
  }
  CHECK(failed == 2);

  const auto errors = textio::read_csv(out / "errors.csv");
  REQUIRE(errors.size() == 3);
  CHECK(errors[1][0] == "genie");
  const auto curve = textio::read_csv(out / "regret_curve.csv");
  CHECK(curve.size() == 3);  // header + both uniform cells
  const auto summary = textio::read_csv(out / "summary.csv");
  REQUIRE(summary.size() == 3);
  CHECK(summary[1][0] == "genie");
  CHECK(summary[1][7] == "2");    // failures
  CHECK(summary[1][4] == "nan");  // no regret samples to summarize
}

TEST_CASE("search and result artifacts round-trip through CSV") {
  const fs::path dir = fresh_dir("artifacts");
  const problems::Suite s = harness::load_suite(config_dir() / "suite_scalar.cfg");
  treesearch::Params p;
  p.budget = 60;
  p.node_steps = treesearch::constant_steps(10);
  p.schedule = sgd::StepSchedule::practical(0.1);
  p.nu2 = 0.1;
  p.rho2 = 0.5;
  p.seed = 2;
  const treesearch::Result res = treesearch::mix_and_match(s, p);

  harness::write_search_csv(res, dir / "search.csv");
  const auto rows = textio::read_csv(dir / "search.csv");
  REQUIRE(rows.size() == res.audit.size() + 1);
  CHECK(rows[0] == std::vector<std::string>{"order", "height", "index",
                                            "alpha_json", "steps", "val_loss",
                                            "b_value"});
  CHECK(rows[1][0] == "1");
  CHECK(rows[1][1] == "1");
  CHECK(rows[1][2] == "1");
  CHECK(rows[1][3].front() == '[');
  CHECK(std::stod(rows[1][5]) == res.audit[0].val_loss);
  CHECK(std::stod(rows[1][6]) == res.audit[0].b_value);

  harness::write_result_csv(harness::mixture_json(res.alpha), res.height_final,
                            res.total_steps, 0.25, dir / "result.csv");
  const auto result_rows = textio::read_csv(dir / "result.csv");
  REQUIRE(result_rows.size() == 2);
  CHECK(result_rows[0] == std::vector<std::string>{"alpha_json", "height",
                                                   "total_steps",
                                                   "regret_if_known"});
  CHECK(result_rows[1][3] == "0.25");
  harness::write_result_csv("[1]", 0, 10, std::nullopt, dir / "result2.csv");
  CHECK(textio::read_csv(dir / "result2.csv")[1][3] == "");
}

TEST_CASE("verification artifacts keep their documented columns") {
  const fs::path dir = fresh_dir("verify_csv");
  const problems::Suite s = harness::load_suite(config_dir() / "suite_scalar.cfg");

  const harness::SmoothnessReport smooth = harness::verify_smoothness(s, 50, 1);
  harness::write_smoothness_csv(smooth, dir / "smooth.csv");
  const auto smooth_rows = textio::read_csv(dir / "smooth.csv");
  REQUIRE(smooth_rows.size() == 2);
  CHECK(smooth_rows[0] ==
        std::vector<std::string>{"pairs", "violations_model", "violations_value",
                                 "max_ratio_model", "max_ratio_value"});
  CHECK(smooth_rows[1][0] == "50");

  harness::ConcentrationOptions opt;
  opt.t_max = 100;
  opt.lambda_budget = 101;
  opt.replicas = 4;
  opt.schedule_E = 100.0;
  const harness::ConcentrationReport conc = harness::verify_concentration(s, opt);
  harness::write_concentration_csv(conc, dir / "conc.csv");
  const auto conc_rows = textio::read_csv(dir / "conc.csv");
  REQUIRE(conc_rows.size() == conc.points.size() + 1);
  CHECK(conc_rows[0] ==
        std::vector<std::string>{"t", "empirical_mean_dsq", "empirical_p99_dsq",
                                 "bound_term_G", "bound_term_diam",
                                 "bound_term_mart", "bound_total"});
  CHECK(conc_rows[1][0] == "0");
}

TEST_CASE("partition demo enumerates the tree with its bound column") {
  const fs::path dir = fresh_dir("partition_csv");
  simplex::PartitionStrategy bisect;
  harness::write_partition_demo_csv(2, 3, bisect, dir / "demo.csv");
  const auto rows = textio::read_csv(dir / "demo.csv");
  REQUIRE(rows.size() == 16);  // header + 1 + 2 + 4 + 8
  CHECK(rows[0] == std::vector<std::string>{"height", "index", "diameter_l1",
                                            "bound", "vertex_json"});
  CHECK(rows[1][0] == "0");
  CHECK(rows[1][1] == "1");
  CHECK(std::stod(rows[1][2]) == 2.0);
  for (size_t i = 1; i < rows.size(); ++i)
    CHECK(std::stod(rows[i][2]) <= std::stod(rows[i][3]) * (1 + 1e-12));

  // Coordinate halving has no certified rate, so the bound is blank.
  simplex::PartitionStrategy coord;
  coord.kind = simplex::PartitionKind::kCoordinateHalving;
  coord.rng_seed = 3;
  harness::write_partition_demo_csv(3, 2, coord, dir / "coord.csv");
  const auto coord_rows = textio::read_csv(dir / "coord.csv");
  REQUIRE(coord_rows.size() == 8);
  CHECK(coord_rows[1][3] == "nan");

  // One source: a single point, nothing to split.
  harness::write_partition_demo_csv(1, 5, bisect, dir / "point.csv");
  CHECK(textio::read_csv(dir / "point.csv").size() == 2);

  CHECK_THROWS_AS(
      (void)harness::write_partition_demo_csv(0, 1, bisect, dir / "x.csv"),
      std::invalid_argument);
  CHECK_THROWS_AS(
      (void)harness::write_partition_demo_csv(2, 25, bisect, dir / "x.csv"),
      std::invalid_argument);
}

TEST_CASE("ingest counts artifact mirrors the report") {
  const fs::path dir = fresh_dir("ingest_csv_out");
  const fs::path cfg_path = write_ingest_fixture(dir);
  const harness::IngestSpec spec =
      harness::parse_ingest_spec(config::Config::load(cfg_path));
  harness::IngestReport report;
  (void)harness::ingest_csv(spec, &report);
  harness::write_ingest_counts_csv(report, dir / "counts.csv");
  const auto rows = textio::read_csv(dir / "counts.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"source", "total", "train",
                                            "validate", "test", "discard"});
  CHECK(rows[1] == std::vector<std::string>{"s1", "6", "4", "1", "1", "0"});
  CHECK(rows[2] == std::vector<std::string>{"s2", "4", "1", "1", "0", "2"});
}

TEST_CASE("mixture json uses shortest round-trip formatting") {
  CHECK(harness::mixture_json({0.5, 0.25, 0.25}) == "[0.5,0.25,0.25]");
  CHECK(harness::mixture_json({1.0}) == "[1]");
}
