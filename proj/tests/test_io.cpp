#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <random>

#include "certikit/io.hpp"
#include "oracles.hpp"

using namespace certikit;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("certikit-test-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("model round trip preserves weights bit-exactly") {
  TempDir tmp;
  const Network net = testgen::random_dense_network(301, {3, 5, 4});
  save_model(net, tmp.file("model.json"));
  const Network loaded = load_model(tmp.file("model.json"));
  CHECK(loaded.input_dim() == 3);
  CHECK(loaded.num_hidden_layers() == 1);
  CHECK((loaded.layer(0).dense_weight() - net.layer(0).dense_weight()).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((loaded.readout().dense_weight() - net.readout().dense_weight()).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((loaded.readout().bias() - net.readout().bias()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conv model round trip") {
  TempDir tmp;
  const Network net = testgen::random_conv_network(302);
  save_model(net, tmp.file("conv.json"));
  const Network loaded = load_model(tmp.file("conv.json"));
  CHECK(loaded.layer(0).kind() == AffineMap::Kind::Conv2D);
  CHECK((loaded.layer(0).conv_kernel() - net.layer(0).conv_kernel()).cwiseAbs().maxCoeff() ==
        0.0);
  std::mt19937_64 rng(5);
  const Vector x = testgen::random_vector(16, rng);
  CHECK((forward(loaded, x).output - forward(net, x).output).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("malformed models raise errors naming the field") {
  TempDir tmp;
  SUBCASE("missing bias") {
    std::ofstream(tmp.file("bad.json"))
        << R"({"version":1,"input_dim":1,"layers":[{"type":"dense","weights":[[1.0]],"activation":"relu"}],"readout":{"type":"dense","weights":[[1.0]],"bias":[0.0],"activation":"none"}})";
    CHECK_THROWS_WITH_AS(load_model(tmp.file("bad.json")), doctest::Contains("bias"), Error);
  }
  SUBCASE("ragged weights name the row") {
    std::ofstream(tmp.file("ragged.json"))
        << R"({"version":1,"input_dim":2,"layers":[],"readout":{"type":"dense","weights":[[1.0,2.0],[3.0]],"bias":[0.0,0.0],"activation":"none"}})";
    CHECK_THROWS_WITH_AS(load_model(tmp.file("ragged.json")), doctest::Contains("row 1"), Error);
  }
  SUBCASE("readout must carry no activation") {
    std::ofstream(tmp.file("act.json"))
        << R"({"version":1,"input_dim":1,"layers":[],"readout":{"type":"dense","weights":[[1.0]],"bias":[0.0],"activation":"relu"}})";
    CHECK_THROWS_WITH_AS(load_model(tmp.file("act.json")), doctest::Contains("activation"),
                         Error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_model(tmp.file("nope.json")), doctest::Contains("cannot open"),
                         Error);
  }
}

TEST_CASE("bounds file round trip is bit-exact") {
  TempDir tmp;
  const Network net = testgen::random_dense_network(303, {3, 6, 2});
  const LayerBounds bounds =
      interval_propagate(net, InputBox(Vector::Constant(3, -0.25), Vector::Constant(3, 0.75)));
  save_bounds(bounds, tmp.file("bounds.json"));
  const LayerBounds loaded = load_bounds(tmp.file("bounds.json"), net);
  for (size_t b = 0; b < bounds.lower.size(); ++b) {
    CHECK((loaded.lower[b] - bounds.lower[b]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.upper[b] - bounds.upper[b]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("bounds file validation names the entry") {
  TempDir tmp;
  const Network net = testgen::random_dense_network(304, {2, 3, 2});
  std::ofstream(tmp.file("bad_bounds.json")) << R"({"version":1,"blocks":[
    {"lower":[0.0,0.0],"upper":[1.0,1.0]},
    {"lower":[0.0,2.0,0.0],"upper":[1.0,1.0,1.0]}]})";
  CHECK_THROWS_WITH_AS(load_bounds(tmp.file("bad_bounds.json"), net),
                       doctest::Contains("block 1, entry 1"), Error);
}

TEST_CASE("duals round trip") {
  TempDir tmp;
  const Network net = testgen::random_dense_network(305, {3, 4, 2});
  const DualState duals = testgen::random_duals(net, 306);
  save_duals(duals, tmp.file("duals.json"));
  const DualState loaded = load_duals(tmp.file("duals.json"), net);
  CHECK((loaded.kappa - duals.kappa).cwiseAbs().maxCoeff() == 0.0);
  for (size_t i = 0; i < duals.lambda_c.size(); ++i)
    CHECK((loaded.lambda_c[i] - duals.lambda_c[i]).cwiseAbs().maxCoeff() == 0.0);
  for (size_t i = 0; i < duals.lambda_d.size(); ++i)
    CHECK((loaded.lambda_d[i] - duals.lambda_d[i]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("config parsing, presets, and digest") {
  SUBCASE("defaults and overrides") {
    const SolverConfig config = config_from_json(Json::parse(
        R"({"max_iters": 500, "optimizer": "rmsprop", "learning_rate": 0.01, "kappa_mode": "penalty"})"));
    CHECK(config.max_iters == 500);
    CHECK(config.optimizer == SolverConfig::Optimizer::RMSProp);
    CHECK(config.learning_rate == doctest::Approx(0.01));
    CHECK(config.kappa_mode == SolverConfig::KappaMode::Penalty);
  }
  SUBCASE("mlp preset scales the lambda_c rate") {
    const SolverConfig config = config_from_json(Json::parse(R"({"preset": "mlp"})"));
    CHECK(config.lr_scale_lambda_c == doctest::Approx(0.1));
  }
  SUBCASE("unknown optimizer is rejected") {
    CHECK_THROWS_WITH_AS(config_from_json(Json::parse(R"({"optimizer": "sgd"})")),
                         doctest::Contains("optimizer"), Error);
  }
  SUBCASE("digest is stable and sensitive") {
    const SolverConfig a = config_from_json(Json::parse(R"({"max_iters": 100})"));
    const SolverConfig b = config_from_json(Json::parse(R"({"max_iters": 100})"));
    const SolverConfig c = config_from_json(Json::parse(R"({"max_iters": 101})"));
    CHECK(config_digest(a) == config_digest(b));
    CHECK(config_digest(a) != config_digest(c));
    CHECK(config_digest(a).size() == 16);
  }
  SUBCASE("invalid values are rejected") {
    CHECK_THROWS_AS(config_from_json(Json::parse(R"({"learning_rate": -1.0})")), Error);
    CHECK_THROWS_AS(config_from_json(Json::parse(R"({"anneal_at": [1.5]})")), Error);
  }
}

TEST_CASE("report records serialize deterministically") {
  ReportRecord record;
  record.instance_id = "img-0";
  record.spec = "robustness";
  record.target = 3;
  record.pgd_lower = -0.25;
  record.bound_initial = 1.5;
  record.bound_certified = -0.125;
  record.bound_estimate_final = -0.13;
  record.iterations = 100;
  record.wall_time_s = 0.5;
  record.verdict = "verified";
  record.seed = 7;
  record.config_digest = "deadbeefdeadbeef";
  const std::string line = record.to_json().dump();
  CHECK(line == record.to_json().dump());
  const Json parsed = Json::parse(line);
  CHECK(parsed["bound_certified"].get<double>() == -0.125);
  CHECK(parsed["target"].get<Index>() == 3);
  CHECK(parsed["verdict"] == "verified");
  // bound_certified >= pgd_lower invariant holds for this record
  CHECK(parsed["bound_certified"].get<double>() >= parsed["pgd_lower"].get<double>());
}

TEST_CASE("vector files accept both bare arrays and value objects") {
  TempDir tmp;
  std::ofstream(tmp.file("bare.json")) << "[1.0, 2.0, 3.0]";
  std::ofstream(tmp.file("wrapped.json")) << R"({"values": [1.0, 2.0, 3.0]})";
  const Vector a = load_vector(tmp.file("bare.json"));
  const Vector b = load_vector(tmp.file("wrapped.json"));
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.size() == 3);
}
