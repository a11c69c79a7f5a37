#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "flowinv/checkpoint.hpp"
#include "flowinv/flow.hpp"
#include "flowinv/numdiff.hpp"
#include "flowinv/theory.hpp"
#include "flowinv/train.hpp"
#include "test_util.hpp"

using namespace flowinv;
using Catch::Approx;

namespace {

FlowModel identity_flow(std::size_t d, std::size_t layers = 2, std::size_t hidden = 8) {
  RngStream rng(1);
  return make_flow(d, layers, hidden, rng);  // zero heads: exact identity
}

}  // namespace

TEST_CASE("coupling with zero conditioner is the identity") {
  auto layer = testutil::constant_layer({1.0, 0.0}, 0.0, 0.0);
  Tensor x = Tensor::vector({0.7, -1.3});
  auto [y, logdet] = coupling_forward(layer, x);
  REQUIRE(y.data == x.data);
  REQUIRE(logdet == 0.0);
}

TEST_CASE("coupling pure shift and pure scale, hand evaluated") {
  Tensor x = Tensor::vector({1.0, 2.0});

  auto shift = testutil::constant_layer({1.0, 0.0}, 0.0, 1.0);
  auto [y1, ld1] = coupling_forward(shift, x);
  REQUIRE(y1[0] == Approx(1.0));
  REQUIRE(y1[1] == Approx(3.0));
  REQUIRE(ld1 == 0.0);
  auto [x1, ldi1] = coupling_inverse(shift, y1);
  REQUIRE(x1[0] == Approx(1.0).margin(1e-14));
  REQUIRE(x1[1] == Approx(2.0).margin(1e-14));

  // s = ln 2 via the clamped head: s_raw = atanh(ln2 / s_clamp).
  double ln2 = std::log(2.0);
  auto scale_layer = testutil::constant_layer({1.0, 0.0}, std::atanh(ln2 / 3.0), 0.0);
  auto [y2, ld2] = coupling_forward(scale_layer, x);
  REQUIRE(y2[0] == Approx(1.0));
  REQUIRE(y2[1] == Approx(4.0).epsilon(1e-12));
  REQUIRE(ld2 == Approx(ln2).epsilon(1e-12));
  auto [x2, ldi2] = coupling_inverse(scale_layer, y2);
  REQUIRE(x2[1] == Approx(2.0).epsilon(1e-12));
  REQUIRE(ldi2 == Approx(-ln2).epsilon(1e-12));
}

TEST_CASE("coupling inverse round trip on random points") {
  auto model = testutil::randomized_flow(6, 3, 16, 42);
  RngStream rng(7);
  for (int t = 0; t < 50; ++t) {
    Tensor x = gaussian_sample(rng, {6}, 0.0, 2.0);
    for (const auto& layer : model.layers) {
      auto [y, ld] = coupling_forward(layer, x);
      auto [back, ldi] = coupling_inverse(layer, y);
      REQUIRE(norm_inf(sub(back, x)) < 1e-10);
      REQUIRE(ld + ldi == Approx(0.0).margin(1e-12));
    }
  }
}

TEST_CASE("flow invertibility within 1e-8 for |z|_inf <= 6") {
  auto model = testutil::randomized_flow(8, 4, 16, 11);
  RngStream rng(3);
  for (int t = 0; t < 200; ++t) {
    Tensor z = Tensor::zeros({8});
    for (double& v : z.data) v = rng.uniform(-6.0, 6.0);
    Tensor x = flow_forward(model, z);
    Tensor back = flow_inverse(model, x);
    REQUIRE(norm_inf(sub(back, z)) <= 1e-8);
  }
}

TEST_CASE("forward and inverse log-dets cancel along the same orbit") {
  auto model = testutil::randomized_flow(4, 4, 8, 99);
  RngStream rng(5);
  for (int t = 0; t < 50; ++t) {
    Tensor z = gaussian_sample(rng, {4});
    double ld_fwd = 0.0, ld_inv = 0.0;
    Tensor x = flow_forward(model, z, &ld_fwd);
    flow_inverse(model, x, &ld_inv);
    REQUIRE(ld_fwd + ld_inv == Approx(0.0).margin(1e-10));
  }
}

TEST_CASE("scale clamping bounds every log-det") {
  auto model = testutil::randomized_flow(6, 4, 8, 123, 2.0);
  RngStream rng(9);
  for (int t = 0; t < 30; ++t) {
    Tensor x = gaussian_sample(rng, {6}, 0.0, 5.0);
    for (const auto& layer : model.layers) {
      auto [y, ld] = coupling_forward(layer, x);
      REQUIRE(std::abs(ld) <= 6.0 * layer.s_clamp);
    }
  }
}

TEST_CASE("log prob of the identity-initialized model is the standard normal") {
  auto model = identity_flow(2);
  REQUIRE(flow_log_prob(model, Tensor::vector({0.0, 0.0})) ==
          Approx(-1.8378770664093453).epsilon(1e-14));

  // One-dimensional density comes from the layer-free model (coupling masks
  // need d >= 2).
  FlowModel bare;
  bare.d = 1;
  REQUIRE(flow_log_prob(bare, Tensor::vector({1.0})) ==
          Approx(-1.4189385332046727).epsilon(1e-14));
}

TEST_CASE("analytic log-det matches the brute-force Jacobian oracle") {
  RngStream rng(31);
  for (std::size_t d : {2u, 4u, 6u}) {
    auto model = testutil::randomized_flow(d, 2, 12, 1000 + d);
    for (int t = 0; t < 5; ++t) {
      Tensor x = gaussian_sample(rng, {d}, 0.0, 1.5);
      double ld_inv = 0.0;
      Tensor z = flow_inverse(model, x, &ld_inv);
      double oracle = testutil::brute_force_inverse_logdet(model, x);
      REQUIRE(std::abs(ld_inv - oracle) <= 1e-4 * std::max(1.0, std::abs(oracle)));
      // Full log-prob assembled from the oracle.
      double lp_oracle = standard_normal_log_density(z) + oracle;
      double lp = flow_log_prob(model, x);
      REQUIRE(std::abs(lp - lp_oracle) <= 1e-4 * std::max(1.0, std::abs(lp_oracle)));
    }
  }
}

TEST_CASE("sampling moments, determinism, and round trips") {
  auto model = identity_flow(2, 4, 8);
  RngStream rng(77);
  Tensor samples = flow_sample(model, rng, 10000);
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < samples.rows(); ++r) mean += samples.at(r, c);
    mean /= static_cast<double>(samples.rows());
    REQUIRE(std::abs(mean) < 0.05);
  }

  RngStream r1(123), r2(123);
  Tensor a = flow_sample(model, r1, 1);
  Tensor b = flow_sample(model, r2, 1);
  REQUIRE(a.data == b.data);

  auto bent = testutil::randomized_flow(4, 3, 8, 55);
  RngStream r3(9), r4(9);
  Tensor xs = flow_sample(bent, r3, 20);
  for (std::size_t r = 0; r < xs.rows(); ++r) {
    Tensor z = gaussian_sample(r4, {4});
    Tensor x = flow_forward(bent, z);
    REQUIRE(norm_inf(sub(flow_inverse(bent, x), z)) <= 1e-8);
  }
}

TEST_CASE("flow_grad_z: identity model passes upstream through") {
  auto model = identity_flow(3, 2, 8);
  Tensor z = Tensor::vector({0.1, -0.5, 2.0});
  Tensor u = Tensor::vector({1.0, 2.0, -3.0});
  Tensor g = flow_grad_z(model, z, u);
  REQUIRE(norm_inf(sub(g, u)) < 1e-14);
}

TEST_CASE("flow_grad_z agrees with finite differences and is linear") {
  auto model = testutil::randomized_flow(5, 3, 12, 2024);
  RngStream rng(4);
  for (int t = 0; t < 10; ++t) {
    Tensor z = gaussian_sample(rng, {5});
    Tensor u = gaussian_sample(rng, {5});
    Tensor analytic = flow_grad_z(model, z, u);
    Tensor fd = finite_diff_grad(
        [&](const Tensor& v) { return dot(u, flow_forward(model, v)); }, z);
    REQUIRE(max_relative_error(analytic, fd) <= 1e-4);

    Tensor g2 = flow_grad_z(model, z, scaled(u, 3.5));
    REQUIRE(norm_inf(sub(g2, scaled(analytic, 3.5))) <=
            1e-10 * std::max(1.0, norm_inf(g2)));
  }
}

TEST_CASE("flow_grad_logprob_x: identity model score is -x") {
  auto model = identity_flow(4, 2, 8);
  Tensor x = Tensor::vector({0.5, -1.0, 2.0, 0.0});
  Tensor g = flow_grad_logprob_x(model, x);
  REQUIRE(norm_inf(sub(g, scaled(x, -1.0))) < 1e-14);
}

TEST_CASE("flow_grad_logprob_x agrees with finite differences") {
  auto model = testutil::randomized_flow(4, 3, 12, 77);
  RngStream rng(6);
  for (int t = 0; t < 10; ++t) {
    Tensor x = gaussian_sample(rng, {4}, 0.0, 1.5);
    Tensor analytic = flow_grad_logprob_x(model, x);
    Tensor fd = finite_diff_grad(
        [&](const Tensor& v) { return flow_log_prob(model, v); }, x);
    REQUIRE(max_relative_error(analytic, fd) <= 1e-4);
  }
}

TEST_CASE("score vanishes at a mode found by ascent") {
  auto model = testutil::randomized_flow(3, 2, 8, 404, 0.3);
  Tensor x0 = Tensor::vector({0.2, -0.1, 0.3});
  Tensor mode = find_mode(model, x0, 0.05, 1e-5);
  REQUIRE(norm2(flow_grad_logprob_x(model, mode)) <= 1e-4);
}

TEST_CASE("flow_param_grad matches per-parameter finite differences") {
  auto model = testutil::randomized_flow(2, 2, 6, 31337);
  RngStream rng(8);
  Tensor batch = Tensor::zeros({4, 2});
  for (double& v : batch.data) v = rng.gaussian();

  auto grads = flow_param_grad(model, batch);
  Tensor flat_analytic = flatten_layer_grads(grads, model.param_count());

  const double h = 1e-6;
  std::size_t pos = 0;
  FlowModel probe = model;
  std::vector<Tensor*> params;
  probe.for_each_param([&](Tensor& p) { params.push_back(&p); });
  for (Tensor* p : params) {
    for (std::size_t i = 0; i < p->size(); ++i, ++pos) {
      double saved = (*p)[i];
      (*p)[i] = saved + h;
      double up = flow_mean_nll(probe, batch);
      (*p)[i] = saved - h;
      double down = flow_mean_nll(probe, batch);
      (*p)[i] = saved;
      double fd = (up - down) / (2.0 * h);
      double denom = std::max(std::abs(fd), std::abs(flat_analytic[pos]));
      if (denom > 1e-6)
        REQUIRE(std::abs(fd - flat_analytic[pos]) / denom <= 1e-4);
    }
  }
}

TEST_CASE("flow_param_grad edge cases") {
  auto model = testutil::randomized_flow(2, 2, 6, 21);
  REQUIRE_THROWS_AS(flow_param_grad(model, Tensor::zeros({0, 2})),
                    std::invalid_argument);

  Tensor one = Tensor::zeros({1, 2});
  one.at(0, 0) = 0.3;
  one.at(0, 1) = -0.6;
  Tensor dup = Tensor::zeros({3, 2});
  for (std::size_t r = 0; r < 3; ++r) {
    dup.at(r, 0) = 0.3;
    dup.at(r, 1) = -0.6;
  }
  Tensor g1 = flatten_layer_grads(flow_param_grad(model, one), model.param_count());
  Tensor g3 = flatten_layer_grads(flow_param_grad(model, dup), model.param_count());
  REQUIRE(norm_inf(sub(g1, g3)) < 1e-12);
}

TEST_CASE("checkpoint round trip is bit exact") {
  auto model = testutil::randomized_flow(6, 3, 10, 500);
  auto path = std::filesystem::temp_directory_path() / "flowinv_test_model.nfck";
  checkpoint_save(model, path.string());
  FlowModel loaded = checkpoint_load(path.string());

  REQUIRE(loaded.d == model.d);
  REQUIRE(loaded.layers.size() == model.layers.size());
  bool identical = true;
  std::vector<const Tensor*> lhs, rhs;
  model.for_each_param([&](const Tensor& p) { lhs.push_back(&p); });
  loaded.for_each_param([&](const Tensor& p) { rhs.push_back(&p); });
  for (std::size_t i = 0; i < lhs.size(); ++i)
    if (lhs[i]->data != rhs[i]->data) identical = false;
  REQUIRE(identical);

  RngStream rng(64);
  Tensor x = gaussian_sample(rng, {6});
  REQUIRE(flow_log_prob(model, x) == flow_log_prob(loaded, x));  // 0 ulp
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects corrupted and unsupported files") {
  auto model = testutil::randomized_flow(4, 2, 6, 1);
  auto dir = std::filesystem::temp_directory_path();
  auto path = (dir / "flowinv_corrupt.nfck").string();
  checkpoint_save(model, path);

  auto mutate = [&](std::size_t offset, char value) {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(offset));
    f.put(value);
  };

  mutate(0, 'X');  // magic
  REQUIRE_THROWS_AS(checkpoint_load(path), FormatError);
  checkpoint_save(model, path);
  mutate(4, 9);  // version
  REQUIRE_THROWS_MATCHES(checkpoint_load(path), FormatError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("version")));

  checkpoint_save(model, path);
  auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 5);
  REQUIRE_THROWS_MATCHES(checkpoint_load(path), FormatError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("byte offset")));
  std::filesystem::remove(path);
}

TEST_CASE("non-finite conditioner output names the offending layer") {
  auto model = identity_flow(2);
  model.layers[1].conditioner.b1[0] = std::numeric_limits<double>::quiet_NaN();
  Tensor x = Tensor::vector({0.1, 0.2});
  REQUIRE_THROWS_MATCHES(flow_log_prob(model, x), NumericError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("layer 1")));
}
