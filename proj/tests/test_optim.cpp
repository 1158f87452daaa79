// SPDX-FileCopyrightText: Copyright (c) 2026 The molfusion authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include "molfusion/optim.hpp"
#include "molfusion/parameters.hpp"

using namespace molfusion;
using namespace molfusion::nn;
using Catch::Matchers::WithinAbs;

TEST_CASE("adam_step", "[optim]") {
  SECTION("zero gradient leaves parameters unchanged") {
    std::vector<double> p{1.0, -2.0, 3.0};
    const std::vector<double> g(3, 0.0);
    AdamMoments m;
    for (std::uint64_t t = 1; t <= 5; ++t) adam_step(p, g, m, t, AdamOptions{});
    CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
  }
  SECTION("first step moves by the learning rate") {
    std::vector<double> p{0.0};
    const std::vector<double> g{1.0};
    AdamMoments m;
    adam_step(p, g, m, 1, AdamOptions{.lr = 0.1});
    CHECK_THAT(p[0], WithinAbs(-0.1, 1e-8));
  }
  SECTION("size mismatch is rejected") {
    std::vector<double> p{0.0, 1.0};
    const std::vector<double> g{1.0};
    AdamMoments m;
    CHECK_THROWS_AS(adam_step(p, g, m, 1, AdamOptions{}), ShapeMismatch);
  }
}

TEST_CASE("Adam minimizes a quadratic deterministically", "[optim]") {
  const auto run = [](std::uint64_t seed) {
    Rng rng(seed, "init");
    ParameterStore store;
    auto& x = store.add_xavier("x", 3, 4, rng);
    Adam opt(store, AdamOptions{.lr = 0.05});
    for (int i = 0; i < 300; ++i) {
      store.zero_grad();
      sum(mul(x, x)).backward();
      opt.step();
    }
    return store.snapshot();
  };
  const auto a = run(42);
  const auto b = run(42);
  CHECK(a == b);
  for (double v : a[0]) CHECK(std::abs(v) < 0.05);
}

TEST_CASE("ParameterStore", "[optim]") {
  ParameterStore store;
  store.add_constant("w", 2, 2, 1.0);
  CHECK_THROWS_AS(store.add_constant("w", 1, 1, 0.0), std::invalid_argument);
  CHECK(store.contains("w"));
  CHECK_THROWS_AS(store.get("missing"), std::out_of_range);
  const auto snap = store.snapshot();
  store.get("w").mutable_values()[0] = 7.0;
  store.restore(snap);
  CHECK(store.get("w").values()[0] == 1.0);
  CHECK(store.scalar_count() == 4);
}
