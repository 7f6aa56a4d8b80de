#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "tcplan/corpus/vocab.hpp"
#include "tcplan/error.hpp"
#include "tcplan/synthgen/synthgen.hpp"
#include "tcplan/training/checkpoint.hpp"
#include "tcplan/training/training.hpp"

using namespace tcplan;
using namespace tcplan::training;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  std::vector<corpus::DialogueSample> samples;
  std::vector<corpus::Instance> instances;
  Model model;
};

// First synthetic dialogues until at least `want` instances.
Fixture small_fixture(std::size_t want, std::size_t d = 32) {
  Fixture f;
  synthgen::WorldSpec spec;
  const auto all = synthgen::generate(spec, 12);
  std::size_t count = 0;
  for (const auto& s : all) {
    if (count >= want) break;
    f.samples.push_back(corpus::create_target(s));
    count += corpus::make_training_instances(f.samples.back()).size();
  }
  for (const auto& s : f.samples)
    for (const auto& inst : corpus::make_training_instances(s))
      if (f.instances.size() < want) f.instances.push_back(inst);
  auto cfg = planner::PlannerConfig::desk_scale();
  cfg.d = d;
  cfg.d_ff = 2 * d;
  cfg.n_layers = 1;
  cfg.max_plan_len = 40;
  f.model = planner::init_model(cfg, corpus::build_vocab(f.samples, cfg.tokenizer), 3);
  return f;
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("tcplan_test_" + name); }

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("learning-rate schedule") {
    CHECK(lr_at(0, 1e-3, 200, 1000) == 0.0);
    CHECK(lr_at(100, 1e-3, 200, 1000) == doctest::Approx(5e-4).epsilon(1e-15));
    CHECK(lr_at(200, 1e-3, 200, 1000) == 1e-3);
    CHECK(lr_at(600, 1e-3, 200, 1000) == doctest::Approx(5e-4).epsilon(1e-15));
    CHECK(lr_at(1000, 1e-3, 200, 1000) == 0.0);
    CHECK(lr_at(0, 1e-3, 0, 10) == 1e-3);
    for (std::size_t s = 0; s < 1000; ++s) CHECK(lr_at(s, 1e-3, 200, 1000) <= 1e-3);

    TrainConfig c;
    c.warmup_steps = 10;
    CHECK_THROWS_AS(c.validate(10), ConfigError);
    CHECK_NOTHROW(c.validate(11));
    c.lr = 0.0;
    CHECK_THROWS_AS(c.validate(11), ConfigError);
  }

  TEST_CASE("config JSON") {
    TrainConfig c;
    c.lr = 0.01;
    c.max_steps = 7;
    CHECK(config_to_json(config_from_json(config_to_json(c))) == config_to_json(c));
    CHECK(config_from_json(json{{"epochs", 3}}).epochs == 3);
    CHECK_THROWS_AS(config_from_json(json{{"epoch", 3}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"lr", "fast"}}), ConfigError);
  }

  TEST_CASE("Adam on a quadratic bowl") {
    // f(w) = sum (w - c)^2, gradient 2 (w - c).
    Weights w;
    w.add("p", 1, 3);
    const std::vector<double> c{1.0, -2.0, 0.5};
    auto loss = [&] {
      double s = 0.0;
      for (std::size_t i = 0; i < 3; ++i) s += (w.at("p")[i] - c[i]) * (w.at("p")[i] - c[i]);
      return s;
    };
    Adam adam(w);
    double prev = loss();
    for (int step = 0; step < 50; ++step) {
      std::vector<Tensor> g{Tensor(1, 3)};
      for (std::size_t i = 0; i < 3; ++i) g[0][i] = 2.0 * (w.at("p")[i] - c[i]);
      const Tensor before = w.at("p");
      adam.step(w, g, 0.05);
      if (step == 0) {
        // Bias-corrected first step moves each coordinate by lr * sign(g).
        for (std::size_t i = 0; i < 3; ++i)
          CHECK(w.at("p")[i] - before[i] == doctest::Approx(-0.05 * (g[0][i] > 0 ? 1 : -1)).epsilon(1e-6));
      }
      const double now = loss();
      if (step < 10) CHECK(now < prev);
      prev = now;
    }
    CHECK(prev < 0.5);
  }

  TEST_CASE("global-norm clipping") {
    std::vector<Tensor> g{Tensor::from_rows({{3.0}}), Tensor::from_rows({{4.0}})};
    CHECK(clip_global_norm(g, 1.0) == 5.0);
    CHECK(g[0][0] == doctest::Approx(0.6));
    CHECK(global_norm(g) == doctest::Approx(1.0));
    CHECK(clip_global_norm(g, 10.0) == doctest::Approx(1.0));
    CHECK(g[1][0] == doctest::Approx(0.8));
  }

  TEST_CASE("batch loss is the token-weighted mean and caching knowledge changes nothing") {
    Fixture f = small_fixture(6, 16);
    const auto groups = make_groups(f.model, f.instances);
    REQUIRE(groups.size() >= 2);
    std::vector<const ExampleGroup*> all;
    for (const auto& g : groups) all.push_back(&g);

    double ce_sum = 0.0;
    std::size_t tokens = 0;
    std::vector<ExampleGroup> singles;
    for (const auto& group : groups)
      for (const auto& ex : group.examples) {
        tensorlab::Graph g(false);
        const auto ctx = encoders::encode(g, f.model.weights, f.model.config, ex.input);
        ce_sum += planner::example_loss(g, f.model, ex, ctx).value()[0] * ex.plan_tokens();
        tokens += ex.plan_tokens();
        singles.push_back({group.id, {ex}});
      }
    auto zero = [&] {
      std::vector<Tensor> z;
      for (std::size_t i = 0; i < f.model.weights.size(); ++i)
        z.emplace_back(f.model.weights.tensor(i).rows(), f.model.weights.tensor(i).cols());
      return z;
    };
    auto grouped = zero(), separate = zero();
    const double loss = batch_loss(f.model, all, &grouped);
    CHECK(loss == doctest::Approx(ce_sum / tokens).epsilon(1e-12));

    std::vector<const ExampleGroup*> single_ptrs;
    for (const auto& g : singles) single_ptrs.push_back(&g);
    CHECK(batch_loss(f.model, single_ptrs, &separate) == doctest::Approx(loss).epsilon(1e-12));
    double worst = 0.0;
    for (std::size_t i = 0; i < grouped.size(); ++i)
      for (std::size_t k = 0; k < grouped[i].size(); ++k)
        worst = std::max(worst, std::abs(grouped[i][k] - separate[i][k]));
    CHECK(worst < 1e-12);
    CHECK(global_norm(grouped) > 0.0);
  }

  TEST_CASE("overfitting eight instances") {
    Fixture f = small_fixture(8);
    REQUIRE(f.instances.size() == 8);
    const auto groups = make_groups(f.model, f.instances);
    TrainConfig cfg;
    cfg.lr = 3e-3;
    cfg.warmup_steps = 20;
    cfg.max_steps = 200;
    cfg.batch_size = 8;
    std::ostringstream log;
    const auto result = train(f.model, groups, {}, cfg, {&log, nullptr, {}});
    CHECK(result.steps.size() == 200);
    CHECK(result.steps.back().loss < result.steps.front().loss);
    CHECK(token_accuracy(f.model, groups) == 1.0);

    std::istringstream lines(log.str());
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
      const json j = json::parse(line);
      CHECK(j["step"] == n);
      CHECK(j.contains("lr"));
      CHECK(j.contains("loss"));
      ++n;
    }
    CHECK(n == 200);

    // Decoding reproduces every training plan.
    for (const auto& group : groups)
      for (const auto& ex : group.examples) {
        const auto decoded = planner::greedy_decode(f.model, ex.input);
        std::vector<int> expected(ex.decoder_ids.begin() + ex.input.prefix.size(), ex.decoder_ids.end());
        expected.push_back(corpus::special::kEos);
        CHECK(decoded.ids == expected);
      }
  }

  TEST_CASE("fixed seed gives identical weights regardless of instance order") {
    Fixture f = small_fixture(10, 16);
    TrainConfig cfg;
    cfg.max_steps = 12;
    cfg.warmup_steps = 3;
    cfg.batch_size = 2;
    cfg.seed = 5;
    Model a = f.model, b = f.model, c = f.model;
    train(a, make_groups(a, f.instances), {}, cfg);
    auto reversed = f.instances;
    std::reverse(reversed.begin(), reversed.end());
    train(b, make_groups(b, reversed), {}, cfg);
    CHECK(a.weights == b.weights);
    CHECK(!(a.weights == f.model.weights));
    cfg.seed = 6;
    train(c, make_groups(c, f.instances), {}, cfg);
    CHECK(!(a.weights == c.weights));
  }

  TEST_CASE("dev selection keeps the best epoch") {
    Fixture f = small_fixture(10, 16);
    const auto groups = make_groups(f.model, f.instances);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.warmup_steps = 1;
    cfg.batch_size = 1;
    const auto result = train(f.model, groups, groups, cfg);
    REQUIRE(result.epochs.size() == 3);
    double best = 0.0;
    for (const auto& e : result.epochs) best = std::max(best, e.dev_token_accuracy);
    CHECK(result.best_dev_token_accuracy == best);
    CHECK(result.epochs[result.best_epoch - 1].dev_token_accuracy == best);
    CHECK(token_accuracy(f.model, groups) == best);
  }

  TEST_CASE("non-finite loss aborts with a state dump") {
    Fixture f = small_fixture(4, 16);
    f.model.weights.at("out.b")[0] = NAN;
    const auto groups = make_groups(f.model, f.instances);
    TrainConfig cfg;
    cfg.max_steps = 3;
    cfg.warmup_steps = 1;
    const fs::path dir = temp_file("dump");
    fs::create_directories(dir);
    CHECK_THROWS_AS(train(f.model, groups, {}, cfg, {nullptr, nullptr, dir}), TrainingError);
    CHECK(fs::exists(dir / "tcplan_nonfinite_step0.json"));
    fs::remove_all(dir);
  }

  TEST_CASE("checkpoint round trip and corruption") {
    Fixture f = small_fixture(4, 16);
    const auto groups = make_groups(f.model, f.instances);
    const fs::path path = temp_file("ckpt.bin");
    save_checkpoint(f.model, path);
    const Model loaded = load_checkpoint(path);
    CHECK(loaded.weights == f.model.weights);
    CHECK(loaded.vocab.tokens() == f.model.vocab.tokens());
    CHECK(planner::config_to_json(loaded.config) == planner::config_to_json(f.model.config));
    for (const auto& ex : groups.front().examples)
      CHECK(planner::example_logits(loaded, ex) == planner::example_logits(f.model, ex));

    std::ifstream in(path, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto header_end = bytes.find('\n');
    const json manifest = json::parse(bytes.substr(0, header_end));
    std::set<std::string> names;
    for (const auto& t : manifest["tensors"]) names.insert(t["name"].get<std::string>());
    CHECK(names.size() == manifest["tensors"].size());
    std::set<std::string> registry;
    for (std::size_t i = 0; i < f.model.weights.size(); ++i) registry.insert(f.model.weights.name(i));
    CHECK(names == registry);

    auto write = [&](const std::string& b) { std::ofstream(path, std::ios::binary) << b; };
    std::string flipped = bytes;
    flipped[header_end + 101] ^= 0x10;
    write(flipped);
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    write(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    write(bytes.substr(0, header_end));
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);

    json changed = manifest;
    changed["format_version"] = kCheckpointVersion + 1;
    write(changed.dump() + bytes.substr(header_end));
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    changed = manifest;
    changed["config"]["d"] = 32;
    write(changed.dump() + bytes.substr(header_end));
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    changed = manifest;
    changed["tensors"][0]["shape"][0] = 1;
    write(changed.dump() + bytes.substr(header_end));
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(temp_file("missing.bin")), CheckpointError);
    fs::remove(path);
  }
}
