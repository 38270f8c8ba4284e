#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gibbslab/config.hpp"
#include "gibbslab/dataset_io.hpp"
#include "gibbslab/harness.hpp"
#include "gibbslab/report.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace gibbslab {
namespace {

using testing::data;
using testing::expect_error;
using testing::vec;

bool within(const GenEstimate& g, double want, double k) {
  return std::abs(g.value - want) < k * g.std_error;
}

TEST(EstimateGen, AlphaUnitWorld) {
  auto w = GaussianMeanWorld::unit(1);
  auto g = estimate_gen(GibbsAlgorithm::AlphaGibbs, w, 1, 1, 1000000, 1);
  EXPECT_EQ(g.trials, 1000000u);
  EXPECT_TRUE(within(g, 2.0 / 3.0, 3.0)) << g.value << " +- " << g.std_error;
}

TEST(EstimateGen, TwoStageUnitWorld) {
  auto w = GaussianMeanWorld::unit(2, 1);
  auto g = estimate_gen(GibbsAlgorithm::TwoStageGibbs, w, 2, 3, 1000000, 2);
  EXPECT_TRUE(within(g, 2.0 / 3.0, 3.0)) << g.value << " +- " << g.std_error;
}

TEST(EstimateGen, SupervisedAndFreeGamma) {
  auto w = GaussianMeanWorld::unit(2);
  w.sigma_t2 = 2.0;
  auto g = estimate_gen(GibbsAlgorithm::Supervised, w, 3, 0, 200000, 3);
  EXPECT_TRUE(within(g, gen_supervised_closed(w, 3), 4.0));
  GenOptions o;
  o.gamma = 7.0;
  o.alpha = 0.3;
  auto h = estimate_gen(GibbsAlgorithm::AlphaGibbs, w, 3, 4, 200000, 3, o);
  EXPECT_TRUE(within(h, gen_alpha_closed_weighted(w, 3, 4, 7.0, 0.3), 4.0));
}

TEST(EstimateGen, IndependentOfTargetDataIsZero) {
  auto w = GaussianMeanWorld::unit(1);
  GenOptions o;
  o.gamma = 0.0;
  auto g = estimate_gen(GibbsAlgorithm::AlphaGibbs, w, 2, 2, 100000, 4, o);
  EXPECT_TRUE(within(g, 0.0, 4.0)) << g.value;
}

TEST(EstimateGen, DeterministicAcrossThreads) {
  auto w = GaussianMeanWorld::unit(2);
  GenOptions a, b;
  a.threads = 1;
  b.threads = 3;
  auto x = estimate_gen(GibbsAlgorithm::AlphaGibbs, w, 2, 2, 30000, 5, a);
  auto y = estimate_gen(GibbsAlgorithm::AlphaGibbs, w, 2, 2, 30000, 5, b);
  EXPECT_EQ(x.value, y.value);
  EXPECT_EQ(x.std_error, y.std_error);
}

TEST(EstimateGen, SourceIndependence) {
  auto a = GaussianMeanWorld::unit(1);
  auto b = a;
  b.mu_s = vec({5.0});
  for (int m : {1, 3})
    for (int n : {1, 4}) {
      auto ga = estimate_gen(GibbsAlgorithm::AlphaGibbs, a, m, n, 100000, 10 + m * n);
      auto gb = estimate_gen(GibbsAlgorithm::AlphaGibbs, b, m, n, 100000, 20 + m * n);
      EXPECT_LT(std::abs(ga.value - gb.value), 3.0 * std::hypot(ga.std_error, gb.std_error));
    }
}

TEST(EstimateGen, GenericPathMatchesWorld) {
  auto w = GaussianMeanWorld::unit(1);
  WorldProblemStorage storage;
  auto problem = world_problem(w, storage);
  GenOptions o;
  o.gamma = w.alpha_gamma(2, 2);
  auto g = estimate_gen(GibbsAlgorithm::AlphaGibbs, problem, 2, 2, 100000, 6, o);
  EXPECT_TRUE(within(g, gen_alpha_closed(w, 2, 2), 4.0)) << g.value;
}

TEST(EstimateGen, NestedPopulationRisk) {
  auto w = GaussianMeanWorld::unit(1);
  WorldProblemStorage storage;
  auto problem = world_problem(w, storage);
  problem.population_risk = nullptr;
  GenOptions o;
  o.gamma = w.alpha_gamma(1, 1);
  o.inner_samples = 200;
  auto g = estimate_gen(GibbsAlgorithm::AlphaGibbs, problem, 1, 1, 20000, 7, o);
  EXPECT_TRUE(within(g, 2.0 / 3.0, 4.0)) << g.value;
}

TEST(EstimateGen, ExactNeedsConjugacy) {
  GaussianLogLoss loss(1);
  class Shifted final : public LossFunction {
   public:
    std::string name() const override { return "abs4"; }
    double evaluate(VecRef w, VecRef z) const override { return std::pow((z - w).norm(), 4); }
    Vector gradient(VecRef w, VecRef z) const override {
      return -4.0 * (z - w).squaredNorm() * (z - w);
    }
  } quartic;
  IsotropicGaussian p(vec({0.0}), 1.0);
  TransferProblem problem{&quartic, &p, &p, GaussianPrior{vec({0.0}), 1.0}};
  expect_error(ErrorCode::kNoClosedForm,
               [&] { estimate_gen(GibbsAlgorithm::AlphaGibbs, problem, 1, 1, 10, 0); });
}

TEST(EstimateGen, SgldMode) {
  auto w = GaussianMeanWorld::unit(1);
  GenOptions o;
  o.mode = PosteriorMode::SGLD;
  o.sgld.steps = 1500;
  o.sgld.burn_in = 1000;
  o.sgld.step_size = 5e-3;
  o.sgld.thinning = 50;
  auto g = estimate_gen(GibbsAlgorithm::AlphaGibbs, w, 1, 1, 4000, 8, o);
  EXPECT_TRUE(within(g, 2.0 / 3.0, 4.0)) << g.value << " +- " << g.std_error;
}

TEST(Validate, UnitWorldIdentities) {
  auto w = GaussianMeanWorld::unit(1);
  auto t1 = validate_theorem1(w, 1, 1, 400000, 1);
  EXPECT_NEAR(t1.rhs, 2.0 / 3.0, 1e-14);
  EXPECT_LT(t1.z, 3.0);
  auto w2 = GaussianMeanWorld::unit(2, 1);
  auto t2 = validate_theorem2(w2, 2, 1, 400000, 2);
  EXPECT_NEAR(t2.rhs, 2.0 / 3.0, 1e-14);
  EXPECT_LT(t2.z, 3.0);
  auto p3 = validate_prop3(w, 1, 1, 400000, 3);
  EXPECT_LT(p3.z, 3.0);
  auto t6 = validate_theorem6(w, 1, 1, 400000, 4);
  EXPECT_LT(t6.z, 3.0);
  auto t7 = validate_theorem7(w2, 2, 1, 400000, 5);
  EXPECT_LT(t7.z, 3.0);
  EXPECT_EQ(t7.trials, 400000u);
  EXPECT_EQ(t7.seed, 5u);
}

TEST(Validate, DegenerateTargetIsExactlyZero) {
  auto w = GaussianMeanWorld::unit(1);
  w.sigma_t2 = 0.0;
  auto t1 = validate_theorem1(w, 2, 2, 1000, 1);
  EXPECT_EQ(t1.rhs, 0.0);
  EXPECT_NEAR(t1.lhs, 0.0, 1e-12);
  auto t6 = validate_theorem6(w, 2, 2, 1000, 1);
  EXPECT_NEAR(t6.lhs, 0.0, 1e-20);
  auto w2 = GaussianMeanWorld::unit(2, 1);
  w2.sigma_t2 = 0.0;
  EXPECT_EQ(validate_theorem2(w2, 2, 2, 1000, 1).rhs, 0.0);
  auto both = GaussianMeanWorld::unit(1);
  both.sigma_t2 = both.sigma_s2 = 0.0;
  auto p3 = validate_prop3(both, 2, 3, 1000, 1);
  EXPECT_EQ(p3.rhs, 0.0);
  EXPECT_NEAR(p3.lhs, 0.0, 1e-12);
}

TEST(Validate, AsymmetricProp3) {
  auto w = GaussianMeanWorld::unit(2);
  w.sigma_s2 = 0.25;
  w.sigma_t2 = 4.0;
  w.mu_s = vec({1.0, 1.0});
  auto r = validate_prop3(w, 2, 5, 300000, 6);
  EXPECT_LT(r.z, 4.0) << r.lhs << " vs " << r.rhs;
}

TEST(Validate, ZScore) {
  EXPECT_DOUBLE_EQ(z_score(1.0, 0.5, 0.25), 2.0);
  EXPECT_EQ(z_score(1.0, 1.0, 0.0), 0.0);
  EXPECT_TRUE(std::isinf(z_score(1.0, 0.5, 0.0)));
}

TEST(Config, ParsesAllFields) {
  const auto cfg = parse_config(R"({
    "world": {"mu_s": [1, 2], "mu_t": 0, "sigma_t2": 2.0, "d_phi": 1},
    "grid": {"m": [1, 2, 10], "n": [1], "d": [2], "gamma": [], "alpha": []},
    "algorithms": ["alpha", "two-stage"],
    "trials": 500, "seed": 9, "mode": "closed-form", "format": "json",
    "z_threshold": 3.5, "threads": 2, "inner_samples": 50,
    "sgld": {"steps": 100, "step_size": 0.01, "burn_in": 10, "thinning": 2}
  })");
  EXPECT_EQ(cfg.grid.points().size(), 3u);
  EXPECT_EQ(cfg.algorithms.size(), 2u);
  EXPECT_EQ(cfg.mode, Mode::ClosedForm);
  EXPECT_EQ(cfg.format, OutputFormat::Json);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.sgld.steps, 100);
  auto w = cfg.world.build(2);
  EXPECT_EQ(w.mu_s, vec({1.0, 2.0}));
  EXPECT_EQ(w.mu_t, vec({0.0, 0.0}));
  EXPECT_EQ(w.d_c, 1);
}

TEST(Config, NamedErrors) {
  auto expect_field = [](const std::string& text, const std::string& field) {
    try {
      parse_config(text);
      ADD_FAILURE() << "expected config error for " << field;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kConfig);
      EXPECT_NE(std::string(e.what()).find("'" + field + "'"), std::string::npos) << e.what();
    }
  };
  expect_field(R"({"trials": 0})", "trials");
  expect_field(R"({"trials": "many"})", "trials");
  expect_field(R"({"bogus": 1})", "bogus");
  expect_field(R"({"world": {"sigma_x": 1}})", "world.sigma_x");
  expect_field(R"({"mode": "dance"})", "mode");
  expect_field(R"({"grid": {"m": []}})", "grid.m");
  expect_field(R"({"algorithms": ["gradient"]})", "algorithms");
  expect_error(ErrorCode::kConfig, [] { parse_config("{not json"); });
  expect_error(ErrorCode::kIo, [] { load_config("/nonexistent/gibbslab.json"); });
}

TEST(Config, ModeAliases) {
  EXPECT_EQ(mode_from_string("Validate"), Mode::Validate);
  EXPECT_EQ(mode_from_string("monte-carlo"), Mode::MonteCarlo);
  EXPECT_FALSE(mode_from_string("other").has_value());
}

ExperimentConfig small_config(Mode mode) {
  ExperimentConfig c;
  c.mode = mode;
  c.grid.m = {1, 2, 10};
  c.trials = 2000;
  c.seed = 3;
  c.threads = 1;
  return c;
}

TEST(RunExperiment, ClosedFormRows) {
  std::ostringstream summary;
  auto r = run_experiment(small_config(Mode::ClosedForm), summary);
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_EQ(r.table.rows.size(), 3u);
  std::ostringstream csv;
  write_csv(r.table, csv);
  std::istringstream lines(csv.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  EXPECT_EQ(count, 4);
  EXPECT_NE(csv.str().find("0.66666666666666663"), std::string::npos);
}

TEST(RunExperiment, ValidatePassesOnUnitWorld) {
  auto cfg = small_config(Mode::Validate);
  cfg.grid.m = {1};
  cfg.trials = 100000;
  std::ostringstream summary;
  auto r = run_experiment(cfg, summary);
  EXPECT_EQ(r.exit_code, kExitOk) << summary.str();
  std::ostringstream js;
  write_json(r.table, js);
  auto doc = nlohmann::json::parse(js.str());
  ASSERT_TRUE(doc.is_array());
  ASSERT_FALSE(doc.empty());
  for (const char* key : {"test", "lhs", "rhs", "z", "trials", "seed", "params"})
    EXPECT_TRUE(doc[0].contains(key)) << key;
  EXPECT_TRUE(doc[0]["seed"].is_number_unsigned());
}

TEST(RunExperiment, ValidationFailureSetsExitCode) {
  auto cfg = small_config(Mode::Validate);
  cfg.grid.m = {1};
  cfg.z_threshold = 1e-9;
  std::ostringstream summary;
  auto r = run_experiment(cfg, summary);
  EXPECT_EQ(r.exit_code, kExitValidationFailure);
  EXPECT_FALSE(r.failures.empty());
}

TEST(RunExperiment, ByteIdenticalOutputs) {
  auto cfg = small_config(Mode::MonteCarlo);
  std::ostringstream s1, s2, a, b;
  write_csv(run_experiment(cfg, s1).table, a);
  cfg.threads = 2;
  write_csv(run_experiment(cfg, s2).table, b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(RunExperiment, IoErrorNamesPath) {
  auto cfg = small_config(Mode::ClosedForm);
  cfg.output_path = "/nonexistent-dir/out.csv";
  std::ostringstream summary;
  try {
    run_experiment(cfg, summary);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
    EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/out.csv"), std::string::npos);
  }
}

TEST(DatasetIo, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "gibbslab_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "toy_source.csv";
  const Dataset d = data({{1.5, -2.0}, {0.125, 3.0}}, Role::Source);
  write_dataset_csv(path, d);
  const Dataset back = read_dataset_csv(path);
  EXPECT_EQ(back.role(), Role::Source);
  EXPECT_EQ(back.samples(), d.samples());
  EXPECT_EQ(role_from_filename("x_target.csv"), Role::Target);
  EXPECT_FALSE(role_from_filename("x.csv").has_value());
  std::istringstream bad("x0,x1\n1,2\n3\n");
  expect_error(ErrorCode::kDimMismatch, [&] { parse_dataset_csv(bad, Role::Target); });
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace gibbslab
