#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "gmcop/checkpoint.hpp"
#include "gmcop/config.hpp"
#include "gmcop/training.hpp"
#include "model_helpers.hpp"

using namespace gmcop;

TEST_CASE("parameter store round trips bitwise") {
  ParamStore store;
  Rng rng(3);
  store.add("a/w", rng.normal_vector(6));
  store.add("b/m", Eigen::MatrixXd::Random(3, 4));
  const std::string path = "store_test.ck";
  save_store(path, store);
  const ParamStore back = load_store(path);
  REQUIRE(back.names() == store.names());
  for (const auto& n : store.names())
    CHECK((back.at(n) - store.at(n)).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("identical bytes imply identical models") {
  JointModel m = helpers::tiny_joint(2, 3, 2, 5);
  const std::string p1 = "model_a.ck", p2 = "model_b.ck";
  save_model(p1, m);
  save_model(p2, m);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("model checkpoints restore configuration and predictions") {
  JointModel m = helpers::tiny_joint(3, 2, 2, 7, true);
  ImtsInstance inst;
  inst.history = {{0.2, 1, 0.5}};
  inst.queries = {{0.8, 0}, {0.9, 2}};
  inst.targets = Eigen::Vector2d(0.1, -0.4);
  const double before = joint_loglik(m, inst);

  const std::string path = "model_test.ck";
  save_model(path, m);
  const JointModel back = load_model(path);
  CHECK(back.has_copula);
  CHECK(back.cop.mix_gc);
  CHECK(back.cop.components == 2);
  CHECK(back.marg.flow_width == m.marg.flow_width);
  CHECK(joint_loglik(back, inst) == before);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_model("missing_file.ck"), std::runtime_error);
}

TEST_CASE("marginal-only checkpoints round trip") {
  JointModel m = make_marginal_model(helpers::tiny_marginal(1), 9);
  const std::string path = "marg_test.ck";
  save_model(path, m);
  const JointModel back = load_model(path);
  CHECK_FALSE(back.has_copula);
  ImtsInstance inst;
  inst.queries = {{0.5, 0}};
  inst.targets = Eigen::VectorXd::Constant(1, 0.2);
  CHECK(joint_loglik(back, inst) == joint_loglik(m, inst));
  std::remove(path.c_str());
}

TEST_CASE("config parsing, overrides, and errors") {
  const Config cfg = Config::from_string(
      "# comment\n"
      "lr = 0.002\n"
      "components = 7\n"
      "name = ring # trailing comment\n"
      "\n");
  CHECK(cfg.get_double("lr", 1.0) == 0.002);
  CHECK(cfg.get_int("components", 1) == 7);
  CHECK(cfg.get_string("name", "") == "ring");
  CHECK(cfg.get_int("missing", 42) == 42);

  Config with_overrides = cfg;
  with_overrides.apply_overrides({"lr=0.5", "extra = 3"});
  CHECK(with_overrides.get_double("lr", 0.0) == 0.5);
  CHECK(with_overrides.get_int("extra", 0) == 3);

  CHECK_THROWS_AS(Config::from_string("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(cfg.get_int("name", 0), ConfigError);
  Config bad = cfg;
  CHECK_THROWS_AS(bad.apply_overrides({"nokey"}), ConfigError);
  CHECK_THROWS_AS(Config::from_file("missing.cfg"), ConfigError);
}
