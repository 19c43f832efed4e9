// Copyright 2026 The OccFlow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <functional>

#include "doctest.h"
#include "occflow/nn.hpp"

using namespace occflow;
using namespace occflow::nn;

namespace {

void randomize(Tensor<double>& t, Rng& rng, double scale = 1.0) {
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-scale, scale);
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (int64_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Central finite difference of a scalar functional at one coordinate.
double fd(std::function<double()> eval, double* x, double h = 1e-6) {
  const double x0 = *x;
  *x = x0 + h;
  const double up = eval();
  *x = x0 - h;
  const double dn = eval();
  *x = x0;
  return (up - dn) / (2 * h);
}

}  // namespace

TEST_CASE("conv2d forward/backward agrees with finite differences") {
  Rng rng(1);
  Conv2d<double> conv;
  conv.build(3, 4, 3, rng);
  Tensor<double> x({2, 3, 6, 6});
  randomize(x, rng);
  Tensor<double> probe({2, 4, 6, 6});
  randomize(probe, rng);

  auto loss = [&] { return dot(conv.forward(x), probe); };

  conv.weight.ensure_grad();
  conv.bias.ensure_grad();
  Tensor<double> gx(x.shape());
  conv.backward(x, probe, &gx);

  for (int64_t i : {0, 5, 17, 52, 100}) {
    CHECK(rel_err(fd(loss, &conv.weight.value[i % conv.weight.value.numel()]),
                  conv.weight.grad[i % conv.weight.value.numel()]) < 1e-7);
  }
  CHECK(rel_err(fd(loss, &conv.bias.value[2]), conv.bias.grad[2]) < 1e-7);
  for (int64_t i : {0, 33, 99, 215}) {
    CHECK(rel_err(fd(loss, &x[i]), gx[i]) < 1e-7);
  }
}

TEST_CASE("conv2d over channel-concatenated inputs matches a materialized concat") {
  Rng rng(2);
  Conv2d<double> conv;
  conv.build(5, 2, 3, rng);
  Tensor<double> a({1, 2, 4, 4}), b({1, 3, 4, 4});
  randomize(a, rng);
  randomize(b, rng);
  Tensor<double> cat({1, 5, 4, 4});
  std::copy_n(a.data(), a.numel(), cat.data());
  std::copy_n(b.data(), b.numel(), cat.data() + a.numel());

  const Tensor<double> y_split = conv.forward({&a, &b});
  const Tensor<double> y_cat = conv.forward(cat);
  REQUIRE(y_split.shape() == y_cat.shape());
  for (int64_t i = 0; i < y_cat.numel(); ++i)
    CHECK(y_split[i] == doctest::Approx(y_cat[i]).epsilon(1e-12));

  // gradient w.r.t. each split input matches finite differences
  Tensor<double> probe(y_cat.shape());
  randomize(probe, rng);
  Tensor<double> ga(a.shape()), gb(b.shape());
  conv.weight.ensure_grad();
  conv.bias.ensure_grad();
  conv.backward({&a, &b}, probe, {&ga, &gb});
  auto loss = [&] { return dot(conv.forward({&a, &b}), probe); };
  CHECK(rel_err(fd(loss, &a[7]), ga[7]) < 1e-7);
  CHECK(rel_err(fd(loss, &b[23]), gb[23]) < 1e-7);
}

TEST_CASE("1x1 conv is a per-pixel linear map") {
  Rng rng(3);
  Conv2d<double> conv;
  conv.build(4, 3, 1, rng);
  Tensor<double> x({2, 4, 5, 5});
  randomize(x, rng);
  const Tensor<double> y = conv.forward(x);
  // check one pixel by hand
  for (int oc = 0; oc < 3; ++oc) {
    double want = conv.bias.value[oc];
    for (int ic = 0; ic < 4; ++ic)
      want += conv.weight.value(oc, ic, 0, 0) * x(1, ic, 2, 3);
    CHECK(y(1, oc, 2, 3) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("linear backward agrees with finite differences") {
  Rng rng(4);
  Linear<double> lin;
  lin.build(6, 3, rng);
  Tensor<double> x({5, 6});
  randomize(x, rng);
  Tensor<double> probe({5, 3});
  randomize(probe, rng);
  auto loss = [&] { return dot(lin.forward(x), probe); };
  lin.weight.ensure_grad();
  lin.bias.ensure_grad();
  Tensor<double> gx(x.shape());
  lin.backward(x, probe, &gx);
  for (int64_t i : {0, 7, 17}) CHECK(rel_err(fd(loss, &lin.weight.value[i]), lin.weight.grad[i]) < 1e-8);
  CHECK(rel_err(fd(loss, &lin.bias.value[1]), lin.bias.grad[1]) < 1e-8);
  for (int64_t i : {0, 13, 29}) CHECK(rel_err(fd(loss, &x[i]), gx[i]) < 1e-8);
}

TEST_CASE("layernorm backward agrees with finite differences") {
  Rng rng(5);
  LayerNorm<double> ln;
  ln.build(8);
  // non-trivial gamma/beta
  randomize(ln.gamma.value, rng);
  randomize(ln.beta.value, rng);
  Tensor<double> x({4, 8});
  randomize(x, rng, 2.0);
  Tensor<double> probe({4, 8});
  randomize(probe, rng);

  LayerNorm<double>::Stash stash;
  auto loss = [&] { return dot(ln.forward(x, nullptr), probe); };
  ln.forward(x, &stash);
  ln.gamma.ensure_grad();
  ln.beta.ensure_grad();
  Tensor<double> gx(x.shape());
  ln.backward(stash, probe, &gx);
  for (int64_t i : {0, 3, 7}) {
    CHECK(rel_err(fd(loss, &ln.gamma.value[i]), ln.gamma.grad[i]) < 1e-7);
    CHECK(rel_err(fd(loss, &ln.beta.value[i]), ln.beta.grad[i]) < 1e-7);
  }
  for (int64_t i : {0, 9, 21, 31}) CHECK(rel_err(fd(loss, &x[i]), gx[i]) < 1e-6);
}

TEST_CASE("maxpool2x2 picks maxima and routes gradients to them") {
  Rng rng(6);
  Tensor<double> x({1, 2, 4, 4});
  randomize(x, rng);
  const PoolResult<double> r = maxpool2x2(x);
  CHECK(r.out.shape() == Shape{1, 2, 2, 2});
  // forward: hand check one window
  const double want =
      std::max({x(0, 0, 0, 0), x(0, 0, 0, 1), x(0, 0, 1, 0), x(0, 0, 1, 1)});
  CHECK(r.out(0, 0, 0, 0) == want);
  // backward FD (random values are tie-free almost surely)
  Tensor<double> probe(r.out.shape());
  randomize(probe, rng);
  Tensor<double> gx(x.shape());
  maxpool2x2_backward(r.argmax, probe, gx);
  auto loss = [&] { return dot(maxpool2x2(x).out, probe); };
  for (int64_t i : {0, 5, 12, 31}) CHECK(rel_err(fd(loss, &x[i], 1e-7), gx[i]) < 1e-6);
}

TEST_CASE("nearest upsample repeats values; backward sums the 2x2 groups") {
  Tensor<double> x({1, 1, 2, 2});
  x(0, 0, 0, 0) = 1;
  x(0, 0, 0, 1) = 2;
  x(0, 0, 1, 0) = 3;
  x(0, 0, 1, 1) = 4;
  const Tensor<double> y = upsample2x(x, UpsampleMode::nearest);
  CHECK(y.shape() == Shape{1, 1, 4, 4});
  CHECK(y(0, 0, 0, 0) == 1);
  CHECK(y(0, 0, 0, 1) == 1);
  CHECK(y(0, 0, 1, 1) == 1);
  CHECK(y(0, 0, 0, 2) == 2);
  CHECK(y(0, 0, 3, 3) == 4);

  Tensor<double> g(y.shape());
  g.fill(1.0);
  Tensor<double> gx(x.shape());
  upsample2x_backward(g, UpsampleMode::nearest, gx);
  for (int64_t i = 0; i < 4; ++i) CHECK(gx[i] == 4.0);
}

TEST_CASE("bilinear upsample backward agrees with finite differences") {
  Rng rng(7);
  Tensor<double> x({1, 2, 3, 3});
  randomize(x, rng);
  Tensor<double> probe({1, 2, 6, 6});
  randomize(probe, rng);
  auto loss = [&] { return dot(upsample2x(x, UpsampleMode::bilinear), probe); };
  Tensor<double> gx(x.shape());
  upsample2x_backward(probe, UpsampleMode::bilinear, gx);
  for (int64_t i : {0, 4, 8, 17}) CHECK(rel_err(fd(loss, &x[i]), gx[i]) < 1e-8);
}

TEST_CASE("adam minimizes a separable quadratic") {
  Param<double> p;
  p.value = Tensor<double>({4});
  for (int i = 0; i < 4; ++i) p.value[i] = 3.0 - i;
  Adam<double> opt({&p});
  for (int step = 0; step < 400; ++step) {
    opt.zero_grad();
    // d/dx of 0.5*(x - target)^2, target = i
    for (int i = 0; i < 4; ++i) p.grad[i] = p.value[i] - i;
    opt.step(0.05);
  }
  for (int i = 0; i < 4; ++i) CHECK(std::abs(p.value[i] - i) < 1e-2);
}

TEST_CASE("relu backward masks non-positive activations") {
  Tensor<double> y({4});
  y[0] = -1;
  y[1] = 0;
  y[2] = 0.5;
  y[3] = 2;
  relu_(y);
  Tensor<double> g({4});
  g.fill(1.0);
  relu_backward_(y, g);
  CHECK(g[0] == 0);
  CHECK(g[1] == 0);
  CHECK(g[2] == 1);
  CHECK(g[3] == 1);
}
