#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "dbdn/gradcheck.hpp"
#include "dbdn/ops.hpp"
#include "dbdn/tensor.hpp"

using namespace dbdn;

namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> d(lo, hi);
  std::vector<float> v(s.numel());
  for (float& x : v) x = d(rng);
  return Tensor(s, std::move(v));
}

float at(const Tensor& t, int n, int c, int y, int x) {
  const Shape s = t.shape();
  return t.data()[((static_cast<std::size_t>(n) * s.c + c) * s.h + y) * s.w + x];
}

// Six nested loops over (n, o, oy, ox, c, ky, kx), no unfolding.
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                               int pad, int& oh, int& ow) {
  const Shape xs = x.shape(), ws = w.shape();
  oh = (xs.h + 2 * pad - ws.h) / stride + 1;
  ow = (xs.w + 2 * pad - ws.w) / stride + 1;
  std::vector<double> y(static_cast<std::size_t>(xs.n) * ws.n * oh * ow);
  std::size_t k = 0;
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < ws.n; ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j, ++k) {
          double acc = b.data()[o];
          for (int c = 0; c < xs.c; ++c)
            for (int ky = 0; ky < ws.h; ++ky)
              for (int kx = 0; kx < ws.w; ++kx) {
                const int yy = i * stride + ky - pad, xx = j * stride + kx - pad;
                if (yy >= 0 && yy < xs.h && xx >= 0 && xx < xs.w) {
                  acc += static_cast<double>(at(w, o, c, ky, kx)) * at(x, n, c, yy, xx);
                }
              }
          y[k] = acc;
        }
  return y;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("construction validates the value count") {
  CHECK_THROWS_AS(Tensor(Shape{1, 2, 2, 2}, std::vector<float>(7)), ShapeError);
  const Tensor t({2, 3, 4, 5}, 1.5f);
  CHECK(t.numel() == 120);
  CHECK(t.shape().str().find("2") != std::string::npos);
  CHECK_FALSE(t.has_grad());
  CHECK_FALSE(t.node_id().has_value());
}

TEST_CASE("grad buffer matches the data length once allocated") {
  Tensor t({1, 2, 3, 3});
  auto g = t.grad_mut();
  CHECK(g.size() == t.numel());
  CHECK(std::all_of(g.begin(), g.end(), [](float v) { return v == 0.0f; }));
}

TEST_CASE("copies share storage, clone does not") {
  Tensor a({1, 1, 2, 2}, 1.0f);
  Tensor b = a;
  Tensor c = a.clone();
  b.data_mut()[0] = 5.0f;
  CHECK(a.data()[0] == 5.0f);
  CHECK(c.data()[0] == 1.0f);
  CHECK(a.same_storage(b));
  CHECK_FALSE(a.same_storage(c));
}

TEST_CASE("sum backward gives all ones") {
  std::mt19937_64 rng(1);
  Tensor x = random_tensor({2, 3, 4, 4}, rng);
  x.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(sum(x));
  }
  for (float g : x.grad()) CHECK(g == 1.0f);
}

TEST_CASE("ops outside a tape scope record nothing") {
  std::mt19937_64 rng(2);
  Tensor x = random_tensor({1, 2, 3, 3}, rng);
  x.set_requires_grad(true);
  const Tensor y = relu(x);
  CHECK_FALSE(y.node_id().has_value());
}

TEST_CASE("constants do not get recorded") {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({1, 2, 3, 3}, rng);
  Tape tape;
  TapeScope scope(tape);
  const Tensor y = relu(x);
  CHECK(tape.size() == 0);
  CHECK_FALSE(y.node_id().has_value());
}

TEST_CASE("backward rejects a non-scalar or foreign loss") {
  std::mt19937_64 rng(4);
  Tensor x = random_tensor({1, 2, 3, 3}, rng);
  x.set_requires_grad(true);
  Tape tape, other;
  TapeScope scope(tape);
  const Tensor y = relu(x);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
  const Tensor s = sum(y);
  CHECK_THROWS(other.backward(s));
}

TEST_CASE("fan-out accumulates both branch gradients") {
  // loss = sum(x + relu(x)): d/dx = 1 + [x > 0].
  Tensor x({1, 1, 1, 4}, std::vector<float>{-2.0f, -0.5f, 0.5f, 3.0f});
  x.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(sum(add(x, relu(x))));
  }
  const std::vector<float> expected{1.0f, 1.0f, 2.0f, 2.0f};
  for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == expected[i]);
}

TEST_CASE("x + x doubles the gradient") {
  Tensor x({1, 1, 2, 2}, 0.3f);
  x.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(sum(add(x, x)));
  }
  for (float g : x.grad()) CHECK(g == 2.0f);
}

TEST_CASE("replaying the tape is bit-identical") {
  std::mt19937_64 rng(5);
  const Tensor x0 = random_tensor({2, 3, 5, 5}, rng);
  const Tensor w0 = random_tensor({4, 3, 3, 3}, rng);
  const Tensor b0 = random_tensor({4, 1, 1, 1}, rng);
  const Tensor t = random_tensor({2, 4, 5, 5}, rng);
  auto run = [&](std::vector<float>& out, std::vector<float>& gw) {
    Tensor x = x0.clone(), w = w0.clone(), b = b0.clone();
    w.set_requires_grad(true);
    b.set_requires_grad(true);
    x.set_requires_grad(true);
    Tape tape;
    TapeScope scope(tape);
    const Tensor y = relu(conv2d(x, ConvParams{w, b, 1, 1}));
    tape.backward(l1_loss(y, t));
    out.assign(y.data().begin(), y.data().end());
    gw.assign(w.grad().begin(), w.grad().end());
    gw.insert(gw.end(), x.grad().begin(), x.grad().end());
  };
  std::vector<float> y1, g1, y2, g2;
  run(y1, g1);
  run(y2, g2);
  CHECK(y1 == y2);
  CHECK(g1 == g2);
}

}  // TEST_SUITE

TEST_SUITE("ops") {

TEST_CASE("conv2d matches a direct six-loop convolution") {
  std::mt19937_64 rng(11);
  struct G { Shape x; int out, k, s, p; };
  for (const G g : {G{{2, 3, 7, 6}, 4, 3, 1, 1}, G{{1, 2, 7, 7}, 3, 3, 2, 1},
                    G{{1, 4, 5, 5}, 2, 1, 1, 0}, G{{1, 3, 8, 8}, 5, 5, 1, 2},
                    G{{2, 1, 6, 6}, 2, 2, 2, 0}}) {
    const Tensor x = random_tensor(g.x, rng);
    const Tensor w = random_tensor({g.out, g.x.c, g.k, g.k}, rng);
    const Tensor b = random_tensor({g.out, 1, 1, 1}, rng);
    int oh = 0, ow = 0;
    const std::vector<double> expected = naive_conv(x, w, b, g.s, g.p, oh, ow);
    const Tensor y = conv2d(x, ConvParams{w, b, g.s, g.p});
    REQUIRE(y.shape() == Shape{g.x.n, g.out, oh, ow});
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(y.data()[i] == doctest::Approx(expected[i]).epsilon(1e-5));
    }
  }
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
  // <conv(x), y> == <x, conv_t(y)> for the same weight buffer and zero bias.
  std::mt19937_64 rng(12);
  struct G { int in_c, out_c, k, s, p, hx; };
  for (const G g : {G{3, 2, 6, 2, 2, 8}, G{2, 3, 9, 3, 3, 9}, G{4, 4, 3, 1, 1, 5},
                    G{2, 2, 4, 2, 1, 6}}) {
    // conv maps (out_c channels, hx) -> (in_c channels, hy); conv_t maps back.
    const Tensor w = random_tensor({g.in_c, g.out_c, g.k, g.k}, rng);
    const Tensor x = random_tensor({2, g.out_c, g.hx, g.hx}, rng);
    const int hy = conv_output_extent(g.hx, g.k, g.s, g.p);
    const Tensor y = random_tensor({2, g.in_c, hy, hy}, rng);
    const Tensor conv_x = conv2d(x, ConvParams{w, Tensor({g.in_c, 1, 1, 1}), g.s, g.p});
    const Tensor convt_y = conv2d_transpose(y, ConvParams{w, Tensor({g.out_c, 1, 1, 1}), g.s, g.p});
    REQUIRE(convt_y.shape() == x.shape());
    const double lhs = dot(conv_x.data(), y.data());
    const double rhs = dot(x.data(), convt_y.data());
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-5));
  }
}

TEST_CASE("conv2d_transpose output extent") {
  CHECK(conv_transpose_output_extent(12, 6, 2, 2) == 24);
  CHECK(conv_transpose_output_extent(10, 9, 3, 3) == 30);
  CHECK_THROWS_AS(conv_transpose_output_extent(1, 2, 1, 2), ShapeError);
}

TEST_CASE("shape mismatches raise ShapeError") {
  std::mt19937_64 rng(13);
  const Tensor x = random_tensor({1, 3, 5, 5}, rng);
  CHECK_THROWS_AS(conv2d(x, ConvParams::conv(2, 4, 3, 1, 1)), ShapeError);
  CHECK_THROWS_AS(conv2d(x, ConvParams::conv(3, 4, 7, 1, 0)), ShapeError);
  CHECK_THROWS_AS(conv2d_transpose(x, ConvParams::transposed(2, 4, 3, 1, 1)), ShapeError);
  CHECK_THROWS_AS(add(x, random_tensor({1, 3, 5, 4}, rng)), ShapeError);
  CHECK_THROWS_AS(concat_channels({x, random_tensor({1, 2, 4, 5}, rng)}), ShapeError);
  CHECK_THROWS_AS(pixel_shuffle(x, 2), ShapeError);
  CHECK_THROWS_AS(slice_channels(x, 2, 2), ShapeError);
  CHECK_THROWS_AS(l1_loss(x, random_tensor({1, 3, 5, 6}, rng)), ShapeError);
}

TEST_CASE("pixel_shuffle index map") {
  // Input channel c*a*a + di*a + dj lands at output (c, a*i + di, a*j + dj).
  const int a = 3;
  Tensor x({1, 2 * a * a, 2, 2});
  auto d = x.data_mut();
  std::iota(d.begin(), d.end(), 0.0f);
  const Tensor y = pixel_shuffle(x, a);
  REQUIRE(y.shape() == Shape{1, 2, 6, 6});
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int di = 0; di < a; ++di)
          for (int dj = 0; dj < a; ++dj) {
            CHECK(at(y, 0, c, a * i + di, a * j + dj) == at(x, 0, c * a * a + di * a + dj, i, j));
          }
}

TEST_CASE("concat keeps argument order and splits gradients losslessly") {
  std::mt19937_64 rng(14);
  Tensor a = random_tensor({2, 1, 3, 3}, rng), b = random_tensor({2, 3, 3, 3}, rng),
         c = random_tensor({2, 2, 3, 3}, rng);
  for (Tensor* t : {&a, &b, &c}) t->set_requires_grad(true);
  const Tensor target = random_tensor({2, 6, 3, 3}, rng, 2.0f, 3.0f);
  Tape tape;
  Tensor y;
  {
    TapeScope scope(tape);
    y = concat_channels({a, b, c});
    tape.backward(l1_loss(y, target));
  }
  REQUIRE(y.shape().c == 6);
  CHECK(at(y, 1, 0, 2, 1) == at(a, 1, 0, 2, 1));
  CHECK(at(y, 1, 3, 0, 2) == at(b, 1, 2, 0, 2));
  CHECK(at(y, 0, 5, 1, 1) == at(c, 0, 1, 1, 1));
  // Upstream gradient is -1/numel everywhere: squared norms must add up.
  double parts = 0.0;
  for (const Tensor* t : {&a, &b, &c}) parts += dot(t->grad(), t->grad());
  const double g = 1.0 / static_cast<double>(y.numel());
  CHECK(parts == doctest::Approx(g * g * y.numel()).epsilon(1e-6));
}

TEST_CASE("slice then concat restores the input") {
  std::mt19937_64 rng(15);
  const Tensor x = random_tensor({2, 5, 3, 4}, rng);
  const Tensor y = concat_channels({slice_channels(x, 0, 2), slice_channels(x, 2, 3)});
  CHECK(std::equal(x.data().begin(), x.data().end(), y.data().begin()));
}

TEST_CASE("relu passes gradient only where the input is positive") {
  Tensor x({1, 1, 1, 5}, std::vector<float>{-1.0f, 0.0f, 1e-6f, 2.0f, -3.0f});
  x.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(sum(relu(x)));
  }
  const std::vector<float> expected{0.0f, 0.0f, 1.0f, 1.0f, 0.0f};
  for (std::size_t i = 0; i < 5; ++i) CHECK(x.grad()[i] == expected[i]);
}

TEST_CASE("l1 loss value and the tie sub-gradient") {
  Tensor p({1, 1, 1, 4}, std::vector<float>{1.0f, 2.0f, 3.0f, 4.0f});
  Tensor t({1, 1, 1, 4}, std::vector<float>{1.0f, 0.0f, 5.0f, 4.0f});
  p.set_requires_grad(true);
  t.set_requires_grad(true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = l1_loss(p, t);
    tape.backward(loss);
  }
  CHECK(loss.item() == doctest::Approx(1.0));
  const std::vector<float> gp{0.0f, 0.25f, -0.25f, 0.0f};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(p.grad()[i] == gp[i]);
    CHECK(t.grad()[i] == -gp[i]);
  }
}

TEST_CASE("l1 through conv2d: weight gradient matches central differences") {
  std::mt19937_64 rng(16);
  const Tensor x = random_tensor({2, 3, 5, 5}, rng);
  const Tensor w = random_tensor({4, 3, 3, 3}, rng, -0.5f, 0.5f);
  const Tensor b = random_tensor({4, 1, 1, 1}, rng, -0.5f, 0.5f);
  const Tensor out = conv2d(x, ConvParams{w, b, 1, 1});
  // Targets sit at least 0.5 away so no |.| kink is crossed at eps 1e-3.
  Tensor t = out.clone();
  for (float& v : t.data_mut()) v += (rng() & 1) ? 0.5f : -0.5f;
  const auto tx = reference::DTensor::from(x);
  const auto tt = reference::DTensor::from(t);
  GradCheckOptions opts;
  opts.eps = 1e-3;
  const GradCheckResult r = check_gradients(
      "conv weight", {w, b},
      [&](std::span<const Tensor> in) { return l1_loss(conv2d(x, ConvParams{in[0], in[1], 1, 1}), t); },
      [&](std::span<const reference::DTensor> in) {
        return reference::l1_loss(reference::conv2d(tx, in[0], in[1], 1, 1), tt);
      },
      opts);
  // A bias gradient is a sum of residual signs and is exactly zero when they
  // balance; the checker skips such elements.
  std::size_t live_biases = 0;
  for (int o = 0; o < 4; ++o) {
    int balance = 0;
    for (int n = 0; n < 2; ++n)
      for (int i = 0; i < 25; ++i) {
        const std::size_t idx = (static_cast<std::size_t>(n) * 4 + o) * 25 + i;
        balance += out.data()[idx] > t.data()[idx] ? 1 : -1;
      }
    if (balance != 0) ++live_biases;
  }
  CHECK(r.checked == w.numel() + live_biases);
  CHECK(r.max_rel_error < 1e-3);
}

TEST_CASE("pixel_shuffle keeps the multiset of values and inverts exactly") {
  std::mt19937_64 rng(21);
  for (int a : {2, 3, 4}) {
    const Tensor x = random_tensor({2, 2 * a * a, 3, 4}, rng);
    const Tensor y = pixel_shuffle(x, a);
    std::vector<float> xs(x.data().begin(), x.data().end()), ys(y.data().begin(), y.data().end());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    CHECK(xs == ys);
    // Undo with the inverse index map.
    Tensor back(x.shape());
    const Shape s = x.shape();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int i = 0; i < s.h; ++i)
          for (int j = 0; j < s.w; ++j) {
            const int oc = c / (a * a), di = (c / a) % a, dj = c % a;
            back.data_mut()[((static_cast<std::size_t>(n) * s.c + c) * s.h + i) * s.w + j] =
                at(y, n, oc, a * i + di, a * j + dj);
          }
    CHECK(std::equal(back.data().begin(), back.data().end(), x.data().begin()));
  }
}


}  // TEST_SUITE
