#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "sodgp/error.hpp"
#include "sodgp/train.hpp"

using namespace sodgp;
using namespace sodgp::testing;

namespace {

bool bit_equal(const Vector& a, const Vector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

struct Setup {
  DgpModel model;
  Tensor x;
  Vector y;
};

Setup deep_setup(std::uint64_t seed, int n = 40, int m = 6) {
  std::mt19937_64 rng(seed);
  Setup s;
  s.x = random_matrix(n, 2, rng);
  s.y = Vector(n);
  for (int i = 0; i < n; ++i) s.y(i) = std::tanh(2.0 * s.x(i, 0)) + 0.1 * s.x(i, 1);
  Architecture arch;
  arch.input_dim = 2;
  arch.hidden_layers = 1;
  s.model = init_model(arch, m, seed);
  attach_subset(s.model, s.x, s.y, kmeans_subset(s.x, m, seed));
  return s;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("adam leaves parameters alone on a zero gradient") {
  Vector p(3);
  p << 1.0, -2.0, 0.5;
  AdamState st;
  st.m = Vector::Constant(3, 0.2);
  st.v = Vector::Constant(3, 0.4);
  st.step = 5;
  const Vector before = p;
  adam_step(p, Vector::Zero(3), st, 0.1);
  CHECK((st.m - Vector::Constant(3, 0.18)).norm() < 1e-15);
  CHECK((st.v - Vector::Constant(3, 0.4 * 0.999)).norm() < 1e-15);
  CHECK(st.step == 6);
  Vector fresh = before;
  AdamState zero;
  adam_step(fresh, Vector::Zero(3), zero, 0.1);
  CHECK(bit_equal(fresh, before));
}

TEST_CASE("adam first step moves by lr times the sign") {
  Vector p = Vector::Zero(4);
  Vector g(4);
  g << 3.0, -0.001, 250.0, -7.0;
  AdamState st;
  adam_step(p, g, st, 0.01);
  for (int i = 0; i < 4; ++i) {
    CHECK(p(i) == doctest::Approx(-0.01 * (g(i) > 0 ? 1.0 : -1.0)).epsilon(1e-4));
  }
}

TEST_CASE("adam on a parabola against the scalar recursion") {
  Vector x = Vector::Constant(1, 5.0);
  AdamState st;
  double xs = 5.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 200; ++t) {
    adam_step(x, Vector::Constant(1, 2.0 * x(0)), st, 0.1);
    const double g = 2.0 * xs;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    xs -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
  }
  CHECK(std::abs(x(0)) < 0.5);
  CHECK(x(0) == doctest::Approx(xs).epsilon(1e-12));
}

TEST_CASE("global norm clipping") {
  Vector g(2);
  g << 300.0, 400.0;
  CHECK(clip_global_norm(g, 100.0) == doctest::Approx(500.0));
  CHECK(g.norm() == doctest::Approx(100.0));
  CHECK(g(0) / g(1) == doctest::Approx(0.75));
  Vector small(2);
  small << 3.0, 4.0;
  clip_global_norm(small, 100.0);
  CHECK(small(0) == 3.0);
}

TEST_CASE("batches exhaust an epoch before repeating") {
  std::vector<int> pool;
  for (int i = 0; i < 23; ++i) pool.push_back(3 * i);
  BatchSampler sampler(pool, 5, 9);
  std::vector<int> stream;
  for (int b = 0; b < 46; ++b) {
    auto batch = sampler.next();
    CHECK(batch.size() == 5);
    stream.insert(stream.end(), batch.begin(), batch.end());
  }
  for (std::size_t epoch = 0; epoch + 23 <= stream.size(); epoch += 23) {
    std::set<int> seen(stream.begin() + static_cast<std::ptrdiff_t>(epoch),
                       stream.begin() + static_cast<std::ptrdiff_t>(epoch + 23));
    CHECK(seen.size() == 23);
  }
  BatchSampler capped(pool, 1000, 1);
  CHECK(capped.batch_size() == 23);
  CHECK(capped.next().size() == 23);
}

TEST_CASE("zero learning rate keeps the parameters") {
  Setup s = deep_setup(1);
  const Vector before = parameter_vector(s.model);
  TrainConfig cfg;
  cfg.iterations = 5;
  cfg.batch_size = 10;
  cfg.learning_rate = 0.0;
  cfg.t_train = 2;
  train(s.model, s.x, s.y, cfg);
  CHECK(bit_equal(parameter_vector(s.model), before));
}

TEST_CASE("fixed seed gives identical histories") {
  auto run = [] {
    Setup s = deep_setup(2);
    TrainConfig cfg;
    cfg.iterations = 30;
    cfg.batch_size = 12;
    cfg.t_train = 3;
    cfg.log_every = 5;
    cfg.seed = 77;
    return train(s.model, s.x, s.y, cfg);
  };
  const TrainHistory a = run();
  const TrainHistory b = run();
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].iteration == b.rows[i].iteration);
    CHECK(std::memcmp(&a.rows[i].elbo, &b.rows[i].elbo, sizeof(ElboBreakdown)) == 0);
  }
  CHECK(bit_equal(a.final_parameters, b.final_parameters));
}

TEST_CASE("history rows are logged from iteration zero") {
  Setup s = deep_setup(3);
  TrainConfig cfg;
  cfg.iterations = 23;
  cfg.batch_size = 8;
  cfg.t_train = 1;
  cfg.log_every = 5;
  std::ostringstream progress;
  cfg.progress = &progress;
  const Vector initial = parameter_vector(s.model);
  std::vector<int> seen;
  Vector first;
  cfg.on_log = [&](int it, const Vector& theta) {
    if (seen.empty()) first = theta;
    seen.push_back(it);
  };
  const TrainHistory h = train(s.model, s.x, s.y, cfg);
  std::vector<int> its;
  for (const auto& r : h.rows) its.push_back(r.iteration);
  CHECK(its == std::vector<int>{0, 5, 10, 15, 20});
  CHECK(seen == its);
  CHECK(bit_equal(first, initial));
  for (std::size_t i = 1; i < h.rows.size(); ++i) CHECK(h.rows[i].wall_ms >= h.rows[i - 1].wall_ms);
  CHECK(progress.str().find("iter 20 elbo") != std::string::npos);
  CHECK(bit_equal(h.final_parameters, parameter_vector(s.model)));
}

TEST_CASE("frozen intermediate noise stays put") {
  Setup s = deep_setup(4);
  const double before = s.model.layers[0].log_noise_var;
  const double out_before = s.model.layers[1].log_noise_var;
  TrainConfig cfg;
  cfg.iterations = 10;
  cfg.batch_size = 10;
  cfg.t_train = 2;
  cfg.freeze_intermediate_noise = true;
  train(s.model, s.x, s.y, cfg);
  CHECK(s.model.layers[0].log_noise_var == before);
  CHECK(s.model.layers[1].log_noise_var != out_before);
}

TEST_CASE("non-finite bound is reported with its iteration") {
  Setup s = deep_setup(5);
  Vector y = s.y;
  y(s.model.subset.sbar[0]) = std::nan("");
  TrainConfig cfg;
  cfg.iterations = 3;
  cfg.batch_size = 1000;
  cfg.t_train = 1;
  try {
    train(s.model, s.x, y, cfg);
    FAIL("expected divergence");
  } catch (const NumericalDivergence& e) {
    CHECK(e.iteration() == 0);
  }
}

TEST_CASE("config and data validation") {
  Setup s = deep_setup(6);
  TrainConfig cfg;
  cfg.iterations = 1;
  cfg.t_train = 0;
  CHECK_THROWS_AS(train(s.model, s.x, s.y, cfg), InvalidSize);
  cfg.t_train = 1;
  CHECK_THROWS_AS(train(s.model, Tensor(s.x.topRows(10)), Vector(s.y.head(10)), cfg),
                  DimensionMismatch);
  DgpModel bare = init_model(s.model.arch, 6, 0);
  CHECK_THROWS_AS(train(bare, s.x, s.y, cfg), UntrainedModel);
}

TEST_CASE("single layer on the full data approaches the evidence") {
  std::mt19937_64 rng(7);
  const double variance = 1.0;
  const double lengthscale = 0.6;
  const double noise = 0.05;
  const Synthetic d = gp_draw(50, 2, variance, lengthscale, noise, rng);
  const double exact =
      gp_log_evidence(se_loop(variance, Vector::Constant(1, lengthscale), d.x, d.x), noise, d.y);
  Architecture arch;
  arch.input_dim = 2;
  DgpModel model = init_model(arch, 50, 1);
  attach_subset(model, d.x, d.y, all_indices(50));
  TrainConfig cfg;
  cfg.iterations = 5000;
  cfg.learning_rate = 0.01;
  cfg.log_every = cfg.iterations;
  train(model, d.x, d.y, cfg);
  const double final_elbo = single_layer_elbo(model, d.x, d.y, model.subset).total;
  CAPTURE(final_elbo);
  CAPTURE(exact);
  CHECK(std::abs(final_elbo - exact) < 2.0);
}

}  // TEST_SUITE
