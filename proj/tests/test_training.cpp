#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "gmcop/metrics.hpp"
#include "gmcop/training.hpp"
#include "model_helpers.hpp"
#include "oracles.hpp"

using namespace gmcop;

namespace {

DsfParams teacher_flow() {
  DsfParams p;
  DsfBlock b1;
  b1.slopes = Eigen::Vector2d(0.9, 1.8);
  b1.offsets = Eigen::Vector2d(0.6, -1.1);
  b1.mix = Eigen::Vector2d(0.35, 0.65);
  DsfBlock b2;
  b2.slopes = Eigen::Vector2d(1.2, 0.7);
  b2.offsets = Eigen::Vector2d(-0.3, 0.8);
  b2.mix = Eigen::Vector2d(0.5, 0.5);
  p.blocks = {b1, b2};
  return p;
}

Dataset teacher_dataset(int count, std::uint64_t seed) {
  const DsfParams teacher = teacher_flow();
  Rng rng(seed);
  Dataset d;
  d.channels = 1;
  for (int i = 0; i < count; ++i) {
    ImtsInstance inst;
    inst.queries = {{0.5, 0}};
    inst.targets = Eigen::VectorXd::Constant(1, dsf_inverse(teacher, rng.uniform(), 1e-10));
    d.instances.push_back(std::move(inst));
  }
  return d;
}

Dataset ring_dataset(int count, std::uint64_t seed) {
  ToySpec spec;
  spec.kind = ToyKind::ring;
  spec.count = count;
  spec.seed = seed;
  return toy_dataset(spec);
}

TrainConfig quick_config(Stage stage, std::uint64_t seed, int max_epochs = 120) {
  TrainConfig cfg;
  cfg.stage = stage;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 64;
  cfg.max_epochs = max_epochs;
  cfg.early_stop_patience = 15;
  cfg.plateau_patience = 4;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("njnll basics") {
  JointModel m = make_marginal_model(helpers::tiny_marginal(1), 3);
  ImtsInstance inst;
  inst.queries = {{0.5, 0}};
  inst.targets = Eigen::VectorXd::Constant(1, 0.42);
  const auto flows = infer_dsf_params(m, inst);
  CHECK(njnll_loss(m, {inst}) ==
        doctest::Approx(-marginal_loglik(flows[0], 0.42)).epsilon(1e-12));
  // Duplicating an instance leaves the mean unchanged.
  CHECK(njnll_loss(m, {inst, inst}) == doctest::Approx(njnll_loss(m, {inst})).epsilon(1e-12));
}

TEST_CASE("independence-mode loss equals the mean per-instance mnll") {
  JointModel m = make_marginal_model(helpers::tiny_marginal(2), 5);
  std::vector<ImtsInstance> batch;
  Rng rng(7);
  for (int i = 0; i < 4; ++i)
    batch.push_back(helpers::history_free_instance(rng.normal_vector(2)));
  double acc = 0.0;
  for (const auto& inst : batch) acc += mnll(m, inst);
  CHECK(njnll_loss(m, batch) == doctest::Approx(acc / batch.size()).epsilon(1e-10));
}

TEST_CASE("marginal training recovers a known flow within 0.05 nats") {
  const Dataset train = teacher_dataset(1500, 11);
  const Dataset val = teacher_dataset(300, 13);
  JointModel m = make_marginal_model(helpers::tiny_marginal(1), 17);
  const TrainResult result = train_model(m, train, val, quick_config(Stage::marginal, 19));

  const DsfParams teacher = teacher_flow();
  double teacher_nll = 0.0;
  for (const auto& inst : val.instances) teacher_nll -= marginal_loglik(teacher, inst.targets[0]);
  teacher_nll /= static_cast<double>(val.instances.size());

  CHECK(result.best_val < teacher_nll + 0.05);
  // Sanity: the model actually moved from its initialization.
  CHECK(result.history.size() > 5);
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
  const Dataset train = teacher_dataset(128, 23);
  const Dataset val = teacher_dataset(64, 29);
  JointModel m = make_marginal_model(helpers::tiny_marginal(1), 31);
  std::map<std::string, Eigen::MatrixXd> before;
  for (const auto& n : m.params.names()) before[n] = m.params.at(n);
  TrainConfig cfg = quick_config(Stage::marginal, 37, 1);
  cfg.learning_rate = 0.0;
  cfg.early_stop_patience = 1;
  train_model(m, train, val, cfg);
  for (const auto& n : m.params.names())
    CHECK((m.params.at(n) - before[n]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fixed seed reproduces the loss history bitwise") {
  const Dataset train = teacher_dataset(256, 41);
  const Dataset val = teacher_dataset(64, 43);
  TrainConfig cfg = quick_config(Stage::marginal, 47, 8);
  JointModel m1 = make_marginal_model(helpers::tiny_marginal(1), 53);
  JointModel m2 = make_marginal_model(helpers::tiny_marginal(1), 53);
  const TrainResult r1 = train_model(m1, train, val, cfg);
  const TrainResult r2 = train_model(m2, train, val, cfg);
  REQUIRE(r1.history.size() == r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
    CHECK(r1.history[i].val_loss == r2.history[i].val_loss);
  }
}

TEST_CASE("best-validation checkpoint is restored") {
  const Dataset train = teacher_dataset(512, 59);
  const Dataset val = teacher_dataset(128, 61);
  JointModel m = make_marginal_model(helpers::tiny_marginal(1), 67);
  const TrainResult result = train_model(m, train, val, quick_config(Stage::marginal, 71, 40));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : result.history) best = std::min(best, r.val_loss);
  CHECK(result.best_val == best);
  CHECK(njnll_loss(m, val.instances) == doctest::Approx(result.best_val).epsilon(1e-14));
}

TEST_CASE("copula stage freezes the marginal group and improves the ring fit") {
  const Dataset data = ring_dataset(900, 73);
  const SplitIndices split = split_indices(900, 0.7, 0.15, 79);
  const Dataset train = subset(data, split.train);
  const Dataset val = subset(data, split.val);
  const Dataset test = subset(data, split.test);

  JointModel m = make_marginal_model(helpers::tiny_marginal(2), 83);
  train_model(m, train, val, quick_config(Stage::marginal, 89, 80));
  JointModel independence = m;

  attach_copula(m, helpers::tiny_copula(2, 3, 2), 97);
  std::map<std::string, Eigen::MatrixXd> marg_before;
  for (const auto& n : m.params.names_with_prefix("marginal/")) marg_before[n] = m.params.at(n);
  std::vector<double> marg_sums_before;
  for (const auto& inst : val.instances)
    marg_sums_before.push_back(pseudo_observations(m, inst).marginal_loglik_sum);

  const TrainResult cop = train_model(m, train, val, quick_config(Stage::copula, 101, 80));
  CHECK_FALSE(cop.aborted_non_finite);

  // Freeze contract: frozen tensors bitwise identical.
  for (const auto& n : m.params.names_with_prefix("marginal/"))
    CHECK((m.params.at(n) - marg_before[n]).cwiseAbs().maxCoeff() == 0.0);

  // Stage separation: the marginal term is constant through copula training.
  for (std::size_t i = 0; i < val.instances.size(); ++i)
    CHECK(pseudo_observations(m, val.instances[i]).marginal_loglik_sum == marg_sums_before[i]);

  // The trained copula beats the frozen independence baseline on held-out data.
  independence.has_copula = false;
  const double nll_independence = njnll_loss(independence, test.instances);
  const double nll_copula = njnll_loss(m, test.instances);
  CHECK(nll_copula < nll_independence);
}

TEST_CASE("joint-ablation stage trains every parameter group") {
  const Dataset data = ring_dataset(300, 103);
  const SplitIndices split = split_indices(300, 0.8, 0.1, 107);
  JointModel m = helpers::tiny_joint(2, 2, 1, 109);
  std::map<std::string, Eigen::MatrixXd> before;
  for (const auto& n : m.params.names()) before[n] = m.params.at(n);
  TrainConfig cfg = quick_config(Stage::joint_ablation, 113, 4);
  train_model(m, subset(data, split.train), subset(data, split.val), cfg);
  double marg_delta = 0.0, cop_delta = 0.0;
  for (const auto& n : m.params.names_with_prefix("marginal/"))
    marg_delta += (m.params.at(n) - before[n]).cwiseAbs().sum();
  for (const auto& n : m.params.names_with_prefix("copula/"))
    cop_delta += (m.params.at(n) - before[n]).cwiseAbs().sum();
  CHECK(marg_delta > 0.0);
  CHECK(cop_delta > 0.0);
}

TEST_CASE("divergent training aborts with the last finite parameters") {
  const Dataset train = teacher_dataset(128, 127);
  const Dataset val = teacher_dataset(64, 131);
  JointModel m = make_marginal_model(helpers::tiny_marginal(1), 137);
  TrainConfig cfg = quick_config(Stage::marginal, 139, 10);
  cfg.learning_rate = 1e15;
  const TrainResult result = train_model(m, train, val, cfg);
  CHECK(result.aborted_non_finite);
  for (const auto& n : m.params.names()) CHECK(m.params.at(n).allFinite());
  CHECK(std::isfinite(njnll_loss(m, val.instances)));
}

TEST_CASE("gradient check: marginal stage within 1e-4") {
  JointModel m = make_marginal_model(helpers::tiny_marginal(2), 149);
  ImtsInstance inst;
  inst.history = {{0.2, 0, 0.7}, {0.4, 1, -0.1}};
  inst.queries = {{0.8, 0}, {0.9, 1}};
  inst.targets = Eigen::Vector2d(0.25, -0.8);
  const GradCheckReport report = grad_check(m, inst, Stage::marginal);
  CHECK(report.max_rel_err <= 1e-4);
}

TEST_CASE("gradient check: copula stage within 1e-3 and frozen zeros") {
  JointModel m = helpers::tiny_joint(2, 3, 2, 151);
  ImtsInstance inst;
  inst.history = {{0.1, 0, 0.4}};
  inst.queries = {{0.6, 0}, {0.7, 1}, {0.8, 0}, {0.9, 1}};
  inst.targets = Eigen::Vector4d(0.3, -0.6, 1.0, 0.1);
  const GradCheckReport report = grad_check(m, inst, Stage::copula);
  CHECK(report.max_rel_err <= 1e-3);
  int frozen_groups = 0;
  for (const auto& g : report.groups)
    if (g.name.rfind("marginal/", 0) == 0) {
      CHECK(g.max_abs_grad == 0.0);
      ++frozen_groups;
    }
  CHECK(frozen_groups > 0);
}

TEST_CASE("gradient check: joint-ablation stage within 1e-3") {
  JointModel m = helpers::tiny_joint(2, 2, 1, 157);
  ImtsInstance inst;
  inst.queries = {{0.5, 0}, {0.5, 1}};
  inst.targets = Eigen::Vector2d(0.4, -0.9);
  const GradCheckReport report = grad_check(m, inst, Stage::joint_ablation);
  CHECK(report.max_rel_err <= 1e-3);
}

TEST_CASE("history CSV is written with one row per epoch") {
  std::vector<EpochRecord> history = {{1, 0.5, 0.6, 1e-3}, {2, 0.4, 0.55, 1e-3}};
  const std::string path = "history_test.csv";
  write_history_csv(path, history);
  std::ifstream in(path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);  // header + 2 epochs
  std::remove(path.c_str());
}

TEST_CASE("copula stage requires an attached copula") {
  const Dataset train = teacher_dataset(32, 163);
  JointModel m = make_marginal_model(helpers::tiny_marginal(1), 167);
  CHECK_THROWS_AS(train_model(m, train, train, quick_config(Stage::copula, 1, 1)),
                  std::logic_error);
}
