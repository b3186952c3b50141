// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#include "brq/encoder.hpp"

#include <cmath>
#include <vector>

#include <doctest.h>

#include "brq/losses.hpp"
#include "brq/rng.hpp"

using namespace brq;

namespace {

EncoderConfig toy_config() {
  EncoderConfig cfg;
  cfg.n_layers = 1;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.conv_kernel = 5;
  cfg.ffn_expansion = 2;
  cfg.n_codebooks = 2;
  cfg.vocab = 8;
  cfg.max_rel_offset = 4;
  cfg.dropout = 0.0;
  return cfg;
}

template <class S>
Mat<S> random_features(int t_len, int dims, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Mat<S> x(t_len, dims);
  for (S& v : x.d) v = static_cast<S>(rng.normal() * scale);
  return x;
}

}  // namespace

TEST_CASE("seeded construction is bit-identical and counted") {
  const EncoderConfig cfg = toy_config();
  Encoder<float> a(cfg, 7), b(cfg, 7), c(cfg, 8);
  REQUIRE(a.params().size() == b.params().size());
  CHECK(a.parameter_count() == b.parameter_count());
  CHECK(a.parameter_count() > 0);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    CHECK(a.params()[i].value.d == b.params()[i].value.d);
    if (a.params()[i].value.d != c.params()[i].value.d) any_diff = true;
  }
  CHECK(any_diff);

  // Default (toy) configuration parameter count is stable across runs.
  const EncoderConfig defaults;
  Encoder<float> d1(defaults, 1), d2(defaults, 2);
  CHECK(d1.parameter_count() == d2.parameter_count());
}

TEST_CASE("config invariants are enforced") {
  EncoderConfig cfg = toy_config();
  cfg.n_heads = 3;  // does not divide 16
  CHECK_THROWS_AS(Encoder<float>(cfg, 1), UserError);
  cfg = toy_config();
  cfg.conv_kernel = 4;
  CHECK_THROWS_AS(Encoder<float>(cfg, 1), UserError);
  cfg = toy_config();
  cfg.subsample_factor = 2;
  CHECK_THROWS_AS(Encoder<float>(cfg, 1), UserError);
  cfg = toy_config();
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(Encoder<float>(cfg, 1), UserError);
}

TEST_CASE("output length is floor(T/4), matching the stacking arithmetic") {
  const EncoderConfig cfg = toy_config();
  Encoder<float> enc(cfg, 3);
  for (const int t_len : {4, 7, 16, 17, 19, 40, 100}) {
    const auto cache = enc.forward_one(random_features<float>(t_len, 80, 55));
    REQUIRE(cache.probs.size() == 2);
    CHECK(cache.probs[0].rows == t_len / 4);
    CHECK(Encoder<float>::output_length(t_len) == t_len / 4);
    CHECK(cache.probs[0].cols == 8);
  }
  CHECK_THROWS_AS(enc.forward_one(random_features<float>(3, 80, 55)), UserError);
  CHECK_THROWS_AS(enc.forward_one(random_features<float>(16, 40, 55)), UserError);
}

TEST_CASE("head outputs are valid distributions, even for huge inputs") {
  const EncoderConfig cfg = toy_config();
  Encoder<float> enc(cfg, 5);
  for (const double scale : {1.0, 100.0, 1000.0}) {
    const auto cache = enc.forward_one(random_features<float>(24, 80, 99, scale));
    for (const auto& p : cache.probs) {
      CHECK(all_finite(p));
      for (int t = 0; t < p.rows; ++t) {
        double sum = 0.0;
        for (int v = 0; v < p.cols; ++v) {
          sum += p.at(t, v);
          CHECK(p.at(t, v) >= 0.0f);
        }
        CHECK(std::abs(sum - 1.0) < 1e-5);
      }
    }
  }
  // Non-finite input is rejected.
  Mat<float> bad = random_features<float>(8, 80, 1);
  bad.d[13] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(enc.forward_one(bad), UserError);
}

TEST_CASE("forward is a pure function with dropout disabled") {
  Encoder<float> enc(toy_config(), 11);
  const Mat<float> x = random_features<float>(20, 80, 3);
  const auto a = enc.forward_one(x);
  const auto b = enc.forward_one(x);
  for (std::size_t n = 0; n < a.probs.size(); ++n) CHECK(a.probs[n].d == b.probs[n].d);
}

TEST_CASE("dropout is seed-deterministic and changes the output") {
  EncoderConfig cfg = toy_config();
  cfg.dropout = 0.1;
  Encoder<float> enc(cfg, 11);
  const Mat<float> x = random_features<float>(20, 80, 3);
  Rng r1(42), r2(42), r3(43);
  const auto a = enc.forward_one(x, &r1);
  const auto b = enc.forward_one(x, &r2);
  const auto c = enc.forward_one(x, &r3);
  CHECK(a.probs[0].d == b.probs[0].d);
  CHECK(a.probs[0].d != c.probs[0].d);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  Encoder<float> enc(toy_config(), 13);
  const Mat<float> x = random_features<float>(16, 80, 4);
  const auto cache = enc.forward_one(x);
  std::vector<MatF> dlogits;
  for (const auto& p : cache.probs) dlogits.emplace_back(p.rows, p.cols);
  enc.zero_grads();
  enc.backward_one(cache, dlogits);
  for (std::size_t i = 0; i < enc.params().size(); ++i) {
    for (const float g : enc.params()[i].grad.d) CHECK(g == 0.0f);
  }
}

TEST_CASE("analytic gradients match finite differences through the full objective") {
  // 1 conformer layer, d_model 16, V 8, T 8, in double precision.
  const EncoderConfig cfg = toy_config();
  Encoder<double> enc(cfg, 17);
  const Mat<double> x = random_features<double>(8, 80, 5);
  const int t_out = 2;

  Rng rng(23);
  TargetSequence targets;
  targets.n_codebooks = 2;
  targets.length = t_out;
  targets.codebook_size = 8;
  std::vector<MatD> sims;
  for (int n = 0; n < 2; ++n) {
    for (int t = 0; t < t_out; ++t) {
      targets.indices.push_back(static_cast<std::int32_t>(rng.uniform_int(8)));
    }
    MatD s(t_out, 8);
    for (int t = 0; t < t_out; ++t) {
      double sum = 0.0;
      for (int v = 0; v < 8; ++v) {
        s.at(t, v) = -std::log(std::max(rng.uniform(), 1e-12));
        sum += s.at(t, v);
      }
      for (int v = 0; v < 8; ++v) s.at(t, v) /= sum;
    }
    sims.push_back(std::move(s));
  }
  const std::vector<bool> masked{true, true};
  LossConfig lcfg;  // CE + 0.1 KL, the full objective

  auto loss_of = [&]() {
    const auto cache = enc.forward_one(x);
    return combined_loss(cache.probs, targets, sims, masked, lcfg).total;
  };

  const auto cache = enc.forward_one(x);
  const auto dlogits = combined_loss_grad(cache.probs, targets, sims, masked, lcfg);
  enc.zero_grads();
  enc.backward_one(cache, dlogits);

  const double h = 1e-4;
  double max_rel = 0.0;
  for (std::size_t i = 0; i < enc.params().size(); ++i) {
    auto& p = enc.params()[i];
    for (std::size_t j = 0; j < p.value.d.size(); ++j) {
      const double saved = p.value.d[j];
      p.value.d[j] = saved + h;
      const double up = loss_of();
      p.value.d[j] = saved - h;
      const double down = loss_of();
      p.value.d[j] = saved;
      const double fd = (up - down) / (2 * h);
      const double an = p.grad.d[j];
      const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
      max_rel = std::max(max_rel, rel);
    }
  }
  CHECK(max_rel < 1e-4);
}

TEST_CASE("unmasked positions receive zero logit gradients") {
  Encoder<double> enc(toy_config(), 19);
  const Mat<double> x = random_features<double>(16, 80, 6);
  const auto cache = enc.forward_one(x);
  Rng rng(29);
  TargetSequence targets;
  targets.n_codebooks = 2;
  targets.length = 4;
  targets.codebook_size = 8;
  for (int i = 0; i < 8; ++i) {
    targets.indices.push_back(static_cast<std::int32_t>(rng.uniform_int(8)));
  }
  const std::vector<bool> masked{true, false, true, false};
  LossConfig lcfg;
  std::vector<MatD> sims;
  for (int n = 0; n < 2; ++n) {
    MatD s(4, 8);
    s.fill(1.0 / 8);
    sims.push_back(std::move(s));
  }
  const auto dlogits = combined_loss_grad(cache.probs, targets, sims, masked, lcfg);
  for (const auto& g : dlogits) {
    for (int v = 0; v < 8; ++v) {
      CHECK(g.at(1, v) == 0.0);
      CHECK(g.at(3, v) == 0.0);
    }
  }
}
