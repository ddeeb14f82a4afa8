// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "clipstream/checkpoint.hpp"
#include "clipstream/errors.hpp"
#include "clipstream/model.hpp"
#include "gradcheck.hpp"
#include "test_support.hpp"

using namespace clipstream;

namespace {

std::vector<double> random_batch(std::int64_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = u(gen);
  return v;
}

}  // namespace

TEST_CASE("zero weights give zero logits and a uniform softmax") {
  MeanFrameSoftmax m({4, 3, 3, 3}, 5);
  const ModelState s = load_default_weights(m.spec(), InitSpec::parse("zeros"), 0);
  const auto data = random_batch(3 * 4 * 27, 1);
  const ForwardResult r = m.forward(s, {3, {4, 3, 3, 3}, data});
  CHECK(r.logits.shape == std::vector<std::int64_t>{3, 5});
  for (double v : r.logits.values) CHECK(v == 0.0);
  for (double p : softmax_rows(r.logits).values) CHECK(p == doctest::Approx(0.2));
}

TEST_CASE("hand-computed logits on a 2x2 input") {
  // Two frames of 2x2x1; pooled is the per-pixel mean over frames.
  const std::vector<double> data{1, 2, 3, 4,  /* frame 0 */
                                 3, 2, 1, 0}; /* frame 1 */
  MeanFrameSoftmax mean({2, 2, 2, 1}, 2);
  LastFrameSoftmax last({2, 2, 2, 1}, 2);
  ModelState s;
  s.parameters["weight"] = NdArray({4, 2});
  s.parameters["weight"].values = {1, 0, 0, 1, 2, -1, 0.5, 3};
  s.parameters["bias"] = NdArray({2});
  s.parameters["bias"].values = {0.25, -0.5};
  // pooled = [2, 2, 2, 2]
  // logit0 = 2*1 + 2*0 + 2*2 + 2*0.5 + 0.25 = 7.25
  // logit1 = 2*0 + 2*1 + 2*-1 + 2*3 - 0.5 = 5.5
  const ForwardResult r = mean.forward(s, {1, {2, 2, 2, 1}, data});
  CHECK(r.logits.values[0] == doctest::Approx(7.25).epsilon(1e-12));
  CHECK(r.logits.values[1] == doctest::Approx(5.5).epsilon(1e-12));
  CHECK(r.activations.at("pooled").values == std::vector<double>{2, 2, 2, 2});
  // last frame = [3, 2, 1, 0]
  // logit0 = 3 + 0 + 2 + 0 + 0.25 = 5.25; logit1 = 0 + 2 - 1 + 0 - 0.5 = 0.5
  const ForwardResult l = last.forward(s, {1, {2, 2, 2, 1}, data});
  CHECK(l.logits.values[0] == doctest::Approx(5.25).epsilon(1e-12));
  CHECK(l.logits.values[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(l.activations.count("last_frame") == 1);
}

TEST_CASE("every declared activation point is present") {
  for (const auto& name : model_registry().names()) {
    auto m = model_registry().create(name, {3, 2, 2, 3}, 4);
    const ModelState s = load_default_weights(m->spec(), InitSpec::parse("uniform:0.1"), 2);
    const auto data = random_batch(5 * 36, 3);
    const ForwardResult r = m->forward(s, {5, {3, 2, 2, 3}, data});
    for (const auto& a : m->spec().activation_points) CHECK(r.activations.count(a) == 1);
    for (double v : r.logits.values) CHECK(std::isfinite(v));
    CHECK_NOTHROW(m->spec().validate());
  }
}

TEST_CASE("input shape mismatch names expected and actual shapes") {
  MeanFrameSoftmax m({4, 3, 3, 3}, 2);
  const ModelState s = load_default_weights(m.spec(), InitSpec::parse("zeros"), 0);
  const auto data = random_batch(2 * 4 * 27, 1);
  try {
    m.forward(s, {2, {4, 3, 3, 1}, data});
    FAIL("shape mismatch accepted");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(4, 3, 3, 3)") != std::string::npos);
    CHECK(msg.find("(4, 3, 3, 1)") != std::string::npos);
  }
}

TEST_CASE("cross-entropy values") {
  MeanFrameSoftmax m({1, 1, 1, 1}, 4);
  NdArray uniform({2, 4}, 0.3);
  const std::vector<std::uint32_t> labels{0, 3};
  CHECK(compute_loss(uniform, labels, kCrossEntropy, m.spec()).value == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  NdArray sure({1, 4}, 0.0);
  sure.values[2] = 800.0;
  const std::vector<std::uint32_t> two{2};
  const LossResult r = compute_loss(sure, two, kCrossEntropy, m.spec());
  CHECK(r.value >= 0.0);
  CHECK(r.value < 1e-12);
  CHECK(std::isfinite(r.logit_gradient.values[0]));
  try {
    compute_loss(uniform, labels, "hinge", m.spec());
    FAIL("unknown loss accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cross_entropy") != std::string::npos);
    CHECK(std::string(e.what()).find("mean_squared_error") != std::string::npos);
  }
  const std::vector<std::uint32_t> bad{0, 4};
  CHECK_THROWS_AS(compute_loss(uniform, bad, kCrossEntropy, m.spec()), ValidationError);
}

TEST_CASE("loss gradients match finite differences in the logits") {
  MeanFrameSoftmax m({1, 1, 1, 1}, 5);
  for (const char* loss : {kCrossEntropy, kMeanSquaredError})
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 gen(seed);
      std::normal_distribution<double> n(0.0, 2.0);
      NdArray logits({3, 5});
      for (auto& v : logits.values) v = n(gen);
      const std::vector<std::uint32_t> labels{static_cast<std::uint32_t>(gen() % 5),
                                              static_cast<std::uint32_t>(gen() % 5),
                                              static_cast<std::uint32_t>(gen() % 5)};
      const LossResult r = compute_loss(logits, labels, loss, m.spec());
      for (std::size_t i = 0; i < logits.values.size(); ++i) {
        NdArray p = logits, q = logits;
        p.values[i] += 1e-5;
        q.values[i] -= 1e-5;
        const double fd = (compute_loss(p, labels, loss, m.spec()).value -
                           compute_loss(q, labels, loss, m.spec()).value) / 2e-5;
        const double g = r.logit_gradient.values[i];
        CHECK(std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6}) <= 1e-4);
      }
    }
}

TEST_CASE("softmax rows sum to one") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0.0, 30.0);
  NdArray logits({50, 7});
  for (auto& v : logits.values) v = n(gen);
  const NdArray p = softmax_rows(logits);
  for (std::int64_t r = 0; r < 50; ++r) {
    double s = 0;
    for (std::int64_t j = 0; j < 7; ++j) s += p(r, j);
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
}

TEST_CASE("backward is linear in the logit gradient") {
  for (const auto& name : model_registry().names()) {
    auto m = model_registry().create(name, {3, 2, 2, 3}, 3);
    const ModelState s = load_default_weights(m->spec(), InitSpec::parse("uniform:0.5"), 1);
    const auto data = random_batch(4 * 36, 4);
    const BatchView view{4, {3, 2, 2, 3}, data};
    const ParamMap zero = m->backward(s, view, NdArray({4, 3}));
    for (const auto& [_, g] : zero)
      for (double v : g.values) CHECK(v == 0.0);
    NdArray g1({4, 3});
    std::mt19937_64 gen(5);
    for (auto& v : g1.values) v = static_cast<double>(gen() % 100) / 7.0;
    NdArray g2 = g1;
    for (auto& v : g2.values) v *= 2;
    const ParamMap a = m->backward(s, view, g1);
    const ParamMap b = m->backward(s, view, g2);
    CHECK(a.size() == m->spec().manifest.size());
    for (const auto& [n, ga] : a)
      for (std::size_t i = 0; i < ga.values.size(); ++i) CHECK(b.at(n).values[i] == 2 * ga.values[i]);
  }
}

TEST_CASE("parameter gradients match finite differences for both models and losses") {
  for (const auto& name : model_registry().names()) {
    auto m = model_registry().create(name, {2, 2, 2, 3}, 3);
    for (const char* loss : {kCrossEntropy, kMeanSquaredError}) {
      double worst = 0.0;
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto r = oracle::check_gradients(*m, seed, loss);
        CHECK(r.parameters <= 200);
        worst = std::max(worst, r.max_rel_error);
      }
      INFO(name << " " << loss);
      CHECK(worst <= 1e-4);
    }
  }
}

TEST_CASE("initializers") {
  MeanFrameSoftmax m({2, 2, 2, 3}, 3);
  const ModelState z = load_default_weights(m.spec(), InitSpec::parse("zeros"), 9);
  for (const auto& [_, p] : z.parameters)
    for (double v : p.values) CHECK(v == 0.0);
  const ModelState a = load_default_weights(m.spec(), InitSpec::parse("uniform:0.05"), 9);
  CHECK(a == load_default_weights(m.spec(), InitSpec::parse("uniform:0.05"), 9));
  CHECK_FALSE(a == load_default_weights(m.spec(), InitSpec::parse("uniform:0.05"), 10));
  for (const auto& [_, p] : a.parameters)
    for (double v : p.values) {
      CHECK(v >= -0.05);
      CHECK(v < 0.05);
    }
  CHECK_THROWS_AS(InitSpec::parse("uniform:x"), ConfigError);
  CHECK_THROWS_AS(InitSpec::parse("uniform:-1"), ConfigError);
}

TEST_CASE("weights load bit-exact from a checkpoint") {
  testing::TempDir tmp;
  MeanFrameSoftmax m({2, 2, 2, 3}, 3);
  ModelState s = load_default_weights(m.spec(), InitSpec::parse("uniform:1"), 4);
  s.parameters["weight"].values[0] = 1.0 / 3.0;
  CheckpointBundle b;
  for (const auto& [n, p] : s.parameters) b.tensors.emplace(n, TensorEntry::from_array(p));
  b.tensors.emplace("optimizer/velocity/weight", TensorEntry::from_array(s.parameters["weight"]));
  write_container(b, tmp / "w.mpck");
  const ModelState back = load_default_weights(m.spec(), InitSpec::parse((tmp / "w.mpck").string()), 0);
  CHECK(back.parameters == s.parameters);
}

TEST_CASE("manifest mismatch lists missing, extra and mis-shaped names") {
  MeanFrameSoftmax m({2, 2, 2, 3}, 3);
  ParamMap p;
  p["weight"] = NdArray({5, 3});
  p["gamma"] = NdArray({3});
  try {
    check_manifest(m.spec(), p);
    FAIL("mismatch accepted");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("missing [bias]") != std::string::npos);
    CHECK(msg.find("extra [gamma]") != std::string::npos);
    CHECK(msg.find("weight (5, 3) vs (12, 3)") != std::string::npos);
  }
}

TEST_CASE("registry") {
  CHECK(model_registry().contains("meanframe"));
  CHECK(model_registry().contains("lastframe"));
  CHECK_THROWS_AS(model_registry().create("nope", {1, 1, 1, 1}, 2), ConfigError);
  CHECK_THROWS_AS(model_registry().add("meanframe", nullptr), RegistrationError);
  ModelSpec dup = MeanFrameSoftmax({1, 1, 1, 1}, 2).spec();
  dup.manifest.push_back(dup.manifest[0]);
  CHECK_THROWS_AS(dup.validate(), RegistrationError);
}

TEST_CASE("create_model_template writes the stub files once") {
  testing::TempDir tmp;
  const auto dir = create_model_template("mynet", tmp / "models");
  CHECK(dir == tmp / "models" / "mynet");
  CHECK(std::filesystem::exists(dir / "model.cpp"));
  CHECK(std::filesystem::exists(dir / "preprocess.json"));
  std::ifstream in(dir / "model.cpp");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("TODO") != std::string::npos);
  CHECK(text.find("@NAME@") == std::string::npos);
  CHECK_THROWS_AS(create_model_template("mynet", tmp / "models"), ConfigError);
  CHECK_THROWS_AS(create_model_template("2bad", tmp / "models"), ValidationError);
  CHECK_THROWS_AS(create_model_template("../x", tmp / "models"), ValidationError);
}
