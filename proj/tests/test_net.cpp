#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fine/net/checkpoint.hpp"
#include "fine/net/loss.hpp"
#include "fine/net/optimizer.hpp"
#include "fine/net/unet.hpp"
#include "support/oracles.hpp"

using namespace fine;
using oracle::random_tensor;

namespace {

// Keeps every entry at least `gap` away from zero so leaky-ReLU kinks are not
// crossed by finite-difference steps.
Tensor<double> away_from_zero(Tensor<double> t, double gap)
{
  for (auto &v : t.data()) {
    v = v >= 0 ? v + gap : v - gap;
  }
  return t;
}

UNetConfig small_2d(int depth = 1, int base = 4)
{
  UNetConfig c;
  c.spatial_rank = 2;
  c.depth = depth;
  c.base_channels = base;
  return c;
}

} // namespace

TEST_CASE("conv forward matches the naive oracle")
{
  for (layers::Dims3 k : {layers::Dims3{3, 3, 3}, layers::Dims3{1, 3, 3}, layers::Dims3{1, 1, 1}}) {
    for (Shape s : {Shape{3, 4, 8, 8}, Shape{3, 4, 8, 6}, Shape{2, 1, 16, 16}, Shape{2, 2, 4, 64}}) {
      const std::size_t taps = k[0] * k[1] * k[2];
      const auto in = random_tensor<double>(s, 1);
      const auto w = random_tensor<double>({5, s[0], taps}, 2);
      const auto b = random_tensor<double>({5}, 3);
      const auto out = layers::conv_forward(in, w, b, k);
      CHECK(oracle::gradient_error(out, oracle::naive_conv(in, w, b, k)) < 1e-12);
    }
  }
}

TEST_CASE("conv float path agrees with the double oracle")
{
  const auto in = random_tensor<double>({4, 4, 8, 16}, 4);
  const auto w = random_tensor<double>({4, 4, 27}, 5, 0.2);
  const auto b = random_tensor<double>({4}, 6);
  const auto out = layers::conv_forward(cast<float>(in), cast<float>(w), cast<float>(b), {3, 3, 3});
  CHECK(relative_error(cast<double>(out), oracle::naive_conv(in, w, b, {3, 3, 3})) < 1e-5);
}

TEST_CASE("layer gradients match central differences across 20 seeds")
{
  const double h = 1e-3;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    const layers::Dims3 k = seed % 2 ? layers::Dims3{3, 3, 3} : layers::Dims3{1, 3, 3};
    const Shape s = seed % 2 ? Shape{2, 4, 4, 4} : Shape{2, 1, 6, 8};
    const auto in = random_tensor<double>(s, 100 + seed);
    const auto w = random_tensor<double>({3, 2, k[0] * k[1] * k[2]}, 200 + seed);
    const auto b = random_tensor<double>({3}, 300 + seed);
    Shape os = s;
    os[0] = 3;
    const auto gout = random_tensor<double>(os, 400 + seed);

    const auto g = layers::conv_backward(in, w, gout, k);
    CHECK(oracle::gradient_error(
              g.input, oracle::numeric_gradient(
                           [&](const Tensor<double> &x) { return dot(layers::conv_forward(x, w, b, k), gout); }, in,
                           h)) < 1e-6);
    CHECK(oracle::gradient_error(
              g.weight, oracle::numeric_gradient(
                            [&](const Tensor<double> &x) { return dot(layers::conv_forward(in, x, b, k), gout); }, w,
                            h)) < 1e-6);
    CHECK(oracle::gradient_error(
              g.bias, oracle::numeric_gradient(
                          [&](const Tensor<double> &x) { return dot(layers::conv_forward(in, w, x, k), gout); }, b,
                          h)) < 1e-6);

    const auto act_in = away_from_zero(random_tensor<double>(s, 500 + seed), 0.01);
    const auto act_g = random_tensor<double>(s, 600 + seed);
    CHECK(oracle::gradient_error(
              layers::leaky_relu_backward(layers::leaky_relu_forward(act_in), act_g),
              oracle::numeric_gradient(
                  [&](const Tensor<double> &x) { return dot(layers::leaky_relu_forward(x), act_g); }, act_in, h)) <
          1e-6);

    const layers::Dims3 f = seed % 2 ? layers::Dims3{2, 2, 2} : layers::Dims3{1, 2, 2};
    const auto pooled = layers::avg_pool_forward(in, f);
    const auto pool_g = random_tensor<double>(pooled.shape(), 700 + seed);
    CHECK(oracle::gradient_error(
              layers::avg_pool_backward(pool_g, in.shape(), f),
              oracle::numeric_gradient(
                  [&](const Tensor<double> &x) { return dot(layers::avg_pool_forward(x, f), pool_g); }, in, h)) <
          1e-6);

    const auto up = layers::upsample_forward(in, f);
    const auto up_g = random_tensor<double>(up.shape(), 800 + seed);
    CHECK(oracle::gradient_error(
              layers::upsample_backward(up_g, in.shape(), f),
              oracle::numeric_gradient(
                  [&](const Tensor<double> &x) { return dot(layers::upsample_forward(x, f), up_g); }, in, h)) <
          1e-6);

    const auto other = random_tensor<double>({1, s[1], s[2], s[3]}, 900 + seed);
    const auto cat_g = random_tensor<double>({3, s[1], s[2], s[3]}, 1000 + seed);
    const auto [ga, gb] = layers::split_channels(cat_g, 2);
    CHECK(oracle::gradient_error(
              ga, oracle::numeric_gradient(
                      [&](const Tensor<double> &x) { return dot(layers::concat_channels(x, other), cat_g); }, in,
                      h)) < 1e-6);
    CHECK(oracle::gradient_error(
              gb, oracle::numeric_gradient(
                      [&](const Tensor<double> &x) { return dot(layers::concat_channels(in, x), cat_g); }, other,
                      h)) < 1e-6);
  }
}

TEST_CASE("parameter count matches the hand-computed sum")
{
  // enc0: 1->4, 4->4; bottom: 4->8, 8->8; dec0_up 8->4; dec0_conv1 8->4; dec0_conv2 4->4; final 4->1 (1x1)
  const std::size_t expect = (4 * 1 * 9 + 4) + (4 * 4 * 9 + 4) + (8 * 4 * 9 + 8) + (8 * 8 * 9 + 8) + (4 * 8 * 9 + 4) +
                             (4 * 8 * 9 + 4) + (4 * 4 * 9 + 4) + (1 * 4 + 1);
  CHECK(expect == 1805);
  CHECK(unet_parameter_count(small_2d()) == expect);
  CHECK(build_unet<float>(small_2d(), 1).parameter_count() == expect);
  UNetConfig c3 = small_2d(2, 4);
  c3.spatial_rank = 3;
  c3.in_channels = 2;
  c3.out_channels = 2;
  CHECK(build_unet<double>(c3, 3).parameter_count() == unet_parameter_count(c3));
}

TEST_CASE("initialization is deterministic and truncated")
{
  const auto a = build_unet<float>(small_2d(2, 8), 42);
  const auto b = build_unet<float>(small_2d(2, 8), 42);
  const auto c = build_unet<float>(small_2d(2, 8), 43);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint() != c.fingerprint());
  for (const auto &l : a.layers) {
    const double fan_in = double(l.weight.size() / l.weight.extent(0));
    const double bound = 2.0 * std::sqrt(2.0 / fan_in);
    for (auto v : l.weight.data()) CHECK(std::abs(v) <= bound);
    for (auto v : l.bias.data()) CHECK(v == 0.0f);
  }
}

TEST_CASE("forward shape contracts")
{
  const auto p = build_unet<float>(small_2d(2, 4), 1);
  const auto y = forward(p, random_tensor<float>({1, 16, 16}, 1));
  CHECK(y.output.shape() == Shape{1, 16, 16});
  CHECK(predict(p, random_tensor<float>({1, 16, 16}, 1)) == y.output);
  CHECK_THROWS_AS(forward(p, Tensor<float>({1, 18, 16})), ShapeError);
  CHECK_THROWS_AS(forward(p, Tensor<float>({2, 16, 16})), ShapeError);
  try {
    forward(p, Tensor<float>({2, 16, 16}));
  } catch (const ShapeError &e) {
    CHECK(std::string(e.what()).find("enc0_conv1") != std::string::npos);
  }
}

TEST_CASE("zero weights give a zero output and weights matter")
{
  auto p = build_unet<double>(small_2d(2, 4), 5);
  const auto x = random_tensor<double>({1, 16, 16}, 2);
  const auto base = predict(p, x);
  auto deeper = p;
  for (auto &l : deeper.layers) {
    if (l.id == "bottom_conv2") l.weight[0] *= 2.0;
  }
  CHECK(relative_error(predict(deeper, x), base) > 0.0);
  auto z = zeros_like(p);
  CHECK(norm(predict(z, x)) == 0.0);
}

TEST_CASE("backward special cases")
{
  const auto p = build_unet<double>(small_2d(2, 4), 6);
  const auto x = random_tensor<double>({1, 8, 8}, 3);
  const auto fr = forward(p, x);
  const auto zero = backward(p, fr.tape, Tensor<double>(fr.output.shape()));
  for (const auto &l : zero.layers) {
    CHECK(norm(l.weight) == 0.0);
    CHECK(norm(l.bias) == 0.0);
  }
  const auto ones = backward(p, fr.tape, Tensor<double>(fr.output.shape(), 1.0));
  CHECK(ones.layers.back().bias[0] == doctest::Approx(64.0));
  auto other = p;
  other.layers[0].weight[0] += 1.0;
  CHECK_THROWS_AS(backward(other, fr.tape, fr.output), Error);
  CHECK_THROWS_AS(backward(p, fr.tape, Tensor<double>({1, 4, 4})), ShapeError);
}

TEST_CASE("whole-network gradient matches central differences")
{
  for (int rank : {2, 3}) {
    UNetConfig c = small_2d(2, 2);
    c.spatial_rank = rank;
    c.in_channels = 2;
    c.out_channels = 2;
    const auto p = build_unet<double>(c, 11 + rank);
    const Shape s = rank == 2 ? Shape{2, 8, 8} : Shape{2, 4, 4, 4};
    const auto x = random_tensor<double>(s, 7);
    const auto fr = forward(p, x);
    const auto gout = random_tensor<double>(fr.output.shape(), 8);
    const auto grads = backward(p, fr.tape, gout);
    Tensor<double> analytic({p.parameter_count()});
    Tensor<double> numeric({p.parameter_count()});
    std::size_t i = 0;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      for (int which = 0; which < 2; ++which) {
        const auto &ga = which == 0 ? grads.layers[l].weight : grads.layers[l].bias;
        const auto &pv = which == 0 ? p.layers[l].weight : p.layers[l].bias;
        const auto ng = oracle::numeric_gradient(
            [&](const Tensor<double> &v) {
              auto q = p;
              (which == 0 ? q.layers[l].weight : q.layers[l].bias) = v;
              return dot(predict(q, x), gout);
            },
            pv, 1e-6);
        for (std::size_t j = 0; j < ng.size(); ++j, ++i) {
          analytic[i] = ga[j];
          numeric[i] = ng[j];
        }
      }
    }
    CAPTURE(rank);
    CHECK(oracle::gradient_error(analytic, numeric) < 1e-6);
  }
}

TEST_CASE("losses")
{
  const Tensor<double> zero({2}), target({2}, std::vector<double>{3, 4});
  CHECK(compute_loss(LossKind::L1, target, target).value == 0.0);
  CHECK(compute_loss(LossKind::L2, zero, target).value == 12.5);
  CHECK(compute_loss(LossKind::L1, zero, target).value == 3.5);
  CHECK_THROWS_AS(parse_loss_kind("huber"), ConfigError);
  CHECK_THROWS_AS(compute_loss(LossKind::L1, zero, Tensor<double>({3})), ShapeError);

  const auto kernel = make_dipole_kernel<double>({4, 4, 4});
  LossAux<double> aux{&kernel, {}};
  const auto pred = random_tensor<double>({1, 4, 4, 4}, 1);
  const auto tgt = random_tensor<double>({1, 4, 4, 4}, 2);
  CHECK(compute_loss(LossKind::QsmComposite, pred, pred, aux).value == 0.0);
  const auto lv = compute_loss(LossKind::QsmComposite, pred, tgt, aux);
  const auto ng = oracle::numeric_gradient(
      [&](const Tensor<double> &x) { return compute_loss(LossKind::QsmComposite, x, tgt, aux).value; }, pred, 1e-7);
  CHECK(oracle::gradient_error(lv.grad, ng) < 1e-5);
  CHECK_THROWS_AS(compute_loss(LossKind::QsmComposite, pred, tgt), ConfigError);
}

TEST_CASE("optimizers")
{
  const auto p = build_unet<double>(small_2d(), 1);
  CHECK_THROWS_AS(make_optimizer(OptimizerKind::Adam, 0.0, p), ConfigError);
  CHECK_THROWS_AS(make_optimizer(OptimizerKind::RmsProp, -1e-3, p), ConfigError);
  auto zero = zeros_like(p);
  for (auto kind : {OptimizerKind::Adam, OptimizerKind::RmsProp}) {
    auto st = make_optimizer(kind, 1e-3, p);
    const auto q = optimizer_step(st, p, zero);
    CHECK(q.fingerprint() == p.fingerprint());
    CHECK(st.step == 1);
  }
  // First Adam step moves each parameter by almost exactly the learning rate.
  auto g = zeros_like(p);
  g.layers[0].weight[0] = 0.37;
  g.layers[0].weight[1] = -5.0;
  auto st = make_optimizer(OptimizerKind::Adam, 1e-3, p);
  const auto q = optimizer_step(st, p, g);
  CHECK(q.layers[0].weight[0] - p.layers[0].weight[0] == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(q.layers[0].weight[1] - p.layers[0].weight[1] == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(q.layers[0].weight[2] == p.layers[0].weight[2]);
  // RMSprop first step: g / sqrt(0.1 g^2) = sqrt(10) sign(g)
  auto rs = make_optimizer(OptimizerKind::RmsProp, 1e-3, p);
  const auto r = optimizer_step(rs, p, g);
  CHECK(r.layers[0].weight[0] - p.layers[0].weight[0] == doctest::Approx(-1e-3 * std::sqrt(10.0)).epsilon(1e-6));
  auto st2 = make_optimizer(OptimizerKind::Adam, 1e-3, p);
  CHECK(optimizer_step(st2, p, g).fingerprint() == q.fingerprint());
}

TEST_CASE("checkpoint round trip")
{
  const auto dir = std::filesystem::temp_directory_path() / "fine_test_ckpt";
  std::filesystem::remove_all(dir);
  UNetConfig c = small_2d(2, 4);
  c.in_channels = 2;
  const auto p = build_unet<float>(c, 9);
  save_checkpoint(p, dir, {"rmsprop", 17});
  CheckpointInfo info;
  const auto q = load_checkpoint<float>(dir, &info);
  CHECK(q.fingerprint() == p.fingerprint());
  CHECK(q.arch == p.arch);
  CHECK(info.optimizer == "rmsprop");
  CHECK(info.step == 17);
  CHECK(std::filesystem::exists(dir / "enc0_conv1.weight.fnt"));
  CHECK_THROWS_AS(load_checkpoint<float>(dir / "missing"), IoError);
}
