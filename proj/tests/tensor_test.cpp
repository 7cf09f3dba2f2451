#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "avtenet/checkpoint.hpp"
#include "avtenet/errors.hpp"
#include "avtenet/tensor.hpp"
#include "doctest.h"

using namespace avtenet;
namespace fs = std::filesystem;

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), true);
}

// Wraps a tensor-valued op into a scalar loss with non-uniform weights so
// every output entry contributes a distinct gradient.
Tensor weighted_sum(const Tensor& t) {
  std::vector<double> w(t.numel());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.05 * static_cast<double>(i % 11);
  return sum_all(mul(t, Tensor(t.shape(), std::move(w))));
}

fs::path tmp_dir() {
  auto p = fs::temp_directory_path() / "avtenet_tensor_test";
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("softmax known values") {
  Tensor t({2}, {0.0, std::log(3.0)});
  auto s = softmax(t, 0);
  CHECK(s.values()[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(s.values()[1] == doctest::Approx(0.75).epsilon(1e-12));

  // Large equal logits must not overflow.
  Tensor big({2}, {1000.0, 1000.0});
  auto sb = softmax(big, 0);
  CHECK(sb.values()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sb.values()[1] == doctest::Approx(0.5).epsilon(1e-12));

  // Row softmax: each row sums to one, rows independent.
  Tensor m({2, 3}, {1, 2, 3, -1, 0, 1});
  auto sm = softmax(m, 1);
  double r0 = sm.values()[0] + sm.values()[1] + sm.values()[2];
  double r1 = sm.values()[3] + sm.values()[4] + sm.values()[5];
  CHECK(r0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r1 == doctest::Approx(1.0).epsilon(1e-12));
  // Both rows have the same logit gaps, so the same probabilities.
  CHECK(sm.values()[0] == doctest::Approx(sm.values()[3]).epsilon(1e-12));
}

TEST_CASE("elementwise and matrix op values") {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 2}, {5, 6, 7, 8});
  CHECK(add(a, b).values() == std::vector<double>{6, 8, 10, 12});
  CHECK(sub(a, b).values() == std::vector<double>{-4, -4, -4, -4});
  CHECK(mul(a, b).values() == std::vector<double>{5, 12, 21, 32});
  CHECK(scale(a, 2.0).values() == std::vector<double>{2, 4, 6, 8});
  CHECK(add_scalar(a, 1.5).values() == std::vector<double>{2.5, 3.5, 4.5, 5.5});
  CHECK(matmul(a, b).values() == std::vector<double>{19, 22, 43, 50});
  CHECK(transpose(a).values() == std::vector<double>{1, 3, 2, 4});
  CHECK(add_row(a, Tensor({2}, {10, 20})).values() == std::vector<double>{11, 22, 13, 24});
  CHECK(mean_all(a).item() == doctest::Approx(2.5));
  CHECK(sum_all(a).item() == doctest::Approx(10.0));
  CHECK(mean_rows(a).values() == std::vector<double>{2, 3});
  CHECK(relu(Tensor({3}, {-1, 0, 2})).values() == std::vector<double>{0, 0, 2});
  CHECK(clamp(Tensor({3}, {-5, 0.3, 5}), -1, 1).values() == std::vector<double>{-1, 0.3, 1});
  CHECK(log_e(Tensor({1}, {std::exp(1.0)})).values()[0] == doctest::Approx(1.0).epsilon(1e-12));

  // c x h x w channel bias broadcast.
  Tensor t({2, 1, 2}, {1, 2, 3, 4});
  CHECK(add_channel_bias(t, Tensor({2}, {10, 20})).values() ==
        std::vector<double>{11, 12, 23, 24});

  CHECK(concat(0, {Tensor({1, 2}, {1, 2}), Tensor({2, 2}, {3, 4, 5, 6})}).values() ==
        std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(concat(1, {Tensor({2, 1}, {1, 3}), Tensor({2, 2}, {2, 9, 4, 9})}).values() ==
        std::vector<double>{1, 2, 9, 3, 4, 9});
  CHECK(slice(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), 1, 1, 2).values() ==
        std::vector<double>{2, 3, 5, 6});
  CHECK(slice(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), 0, 1, 1).values() ==
        std::vector<double>{4, 5, 6});
  CHECK(reshape(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), {3, 2}).values() ==
        std::vector<double>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("conv ops through the tensor layer") {
  Tensor x({1, 3}, {1, 2, 3});
  Tensor k({1, 1, 2}, {1, 1});
  auto y = conv1d(x, k, 1, 0);
  CHECK(y.shape() == Shape{1, 2});
  CHECK(y.values() == std::vector<double>{3, 5});

  Tensor img({1, 2, 2}, {1, 2, 3, 4});
  Tensor k2({1, 1, 2, 2}, {1, 0, 0, 1});
  auto z = conv2d(img, k2, 1, 0);
  CHECK(z.shape() == Shape{1, 1, 1});
  CHECK(z.values()[0] == doctest::Approx(5.0));
}

TEST_CASE("bce loss known values") {
  CHECK(bce_loss(Tensor({2}, {0.5, 0.5}), {1.0, 0.0}).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(Tensor({1}, {0.8}), {1.0}).item() ==
        doctest::Approx(0.2231435513).epsilon(1e-9));
  // Saturated predictions clamp instead of producing inf.
  CHECK(std::isfinite(bce_loss(Tensor({2}, {0.0, 1.0}), {1.0, 0.0}).item()));
  CHECK_THROWS_AS(bce_loss(Tensor({0}, std::vector<double>{}), {}), empty_data_error);
  CHECK_THROWS_AS(bce_loss(Tensor({2}, {0.5, 0.5}), {1.0}), std::invalid_argument);
}

TEST_CASE("adam single step") {
  ParameterSet ps;
  ps["w"] = Tensor({1}, {1.0}, true);
  ps["w"].node()->ensure_grad()[0] = 1.0;
  AdamState st;
  st.lr = 0.1;
  adam_step(ps, st);
  // Bias-corrected first step moves by lr/(1 + eps') ~= lr exactly.
  CHECK(ps["w"].values()[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(st.step_count == 1);
}

TEST_CASE("multi head attention with neutral projections averages values") {
  // wq = wk = 0 makes every attention weight uniform; wv = wo = I passes the
  // values straight through, so each output row is the mean of v's rows.
  std::size_t d = 2;
  AttentionWeights w;
  w.wq = Tensor({d, d}, 0.0);
  w.wk = Tensor({d, d}, 0.0);
  w.wv = Tensor({d, d}, {1, 0, 0, 1});
  w.wo = Tensor({d, d}, {1, 0, 0, 1});
  w.bq = Tensor({d}, 0.0);
  w.bk = Tensor({d}, 0.0);
  w.bv = Tensor({d}, 0.0);
  w.bo = Tensor({d}, 0.0);
  Tensor x({3, d}, {1, 2, 3, 4, 5, 6});
  auto y = multi_head_attention(x, x, x, 1, w);
  REQUIRE(y.shape() == Shape{3, d});
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(y.values()[r * d + 0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(y.values()[r * d + 1] == doctest::Approx(4.0).epsilon(1e-12));
  }
}

TEST_CASE("backward handles fan-out and reuse") {
  Tensor x({1}, {3.0}, true);
  auto y = mul(x, x);  // y = x^2, dy/dx = 2x = 6
  backward(sum_all(y));
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));

  Tensor a({1}, {2.0}, true);
  Tensor b({1}, {5.0}, true);
  Tensor c({1}, {7.0}, true);
  auto z = add(mul(a, b), mul(a, c));  // dz/da = b + c = 12
  backward(sum_all(z));
  CHECK(a.grad()[0] == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(b.grad()[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(c.grad()[0] == doctest::Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS(backward(Tensor({2}, {1, 2})), std::invalid_argument);
}

TEST_CASE("finite differences validate every primitive gradient") {
  Rng rng(7);
  auto check_op = [&](const char* name, ParameterSet params,
                      const std::function<Tensor()>& fwd) {
    INFO(name);
    double err = grad_check(fwd, params, 1e-5, 99, 4);
    CHECK(err <= 1e-6);
  };

  {
    ParameterSet p;
    p["a"] = rand_tensor({3, 4}, rng);
    p["b"] = rand_tensor({3, 4}, rng);
    check_op("add", p, [p] { return weighted_sum(add(p.at("a"), p.at("b"))); });
    check_op("sub", p, [p] { return weighted_sum(sub(p.at("a"), p.at("b"))); });
    check_op("mul", p, [p] { return weighted_sum(mul(p.at("a"), p.at("b"))); });
  }
  {
    ParameterSet p;
    p["a"] = rand_tensor({2, 5}, rng);
    check_op("scale", p, [p] { return weighted_sum(scale(p.at("a"), -1.7)); });
    check_op("add_scalar", p, [p] { return weighted_sum(add_scalar(p.at("a"), 0.4)); });
    check_op("transpose", p, [p] { return weighted_sum(transpose(p.at("a"))); });
    check_op("reshape", p, [p] { return weighted_sum(reshape(p.at("a"), {5, 2})); });
    check_op("mean_all", p, [p] { return mean_all(p.at("a")); });
    check_op("sum_all", p, [p] { return sum_all(p.at("a")); });
    check_op("mean_rows", p, [p] { return weighted_sum(mean_rows(p.at("a"))); });
    check_op("slice", p, [p] { return weighted_sum(slice(p.at("a"), 1, 1, 3)); });
    check_op("softmax_rows", p, [p] { return weighted_sum(softmax(p.at("a"), 1)); });
    check_op("softmax_cols", p, [p] { return weighted_sum(softmax(p.at("a"), 0)); });
    check_op("gelu", p, [p] { return weighted_sum(gelu(p.at("a"))); });
    check_op("relu", p, [p] { return weighted_sum(relu(p.at("a"))); });
  }
  {
    ParameterSet p;
    p["a"] = rand_tensor({3, 4}, rng);
    p["b"] = rand_tensor({4, 2}, rng);
    check_op("matmul", p, [p] { return weighted_sum(matmul(p.at("a"), p.at("b"))); });
  }
  {
    ParameterSet p;
    p["m"] = rand_tensor({3, 4}, rng);
    p["v"] = rand_tensor({4}, rng);
    check_op("add_row", p, [p] { return weighted_sum(add_row(p.at("m"), p.at("v"))); });
  }
  {
    ParameterSet p;
    p["t"] = rand_tensor({3, 2, 4}, rng);
    p["b"] = rand_tensor({3}, rng);
    check_op("add_channel_bias", p,
             [p] { return weighted_sum(add_channel_bias(p.at("t"), p.at("b"))); });
  }
  {
    ParameterSet p;
    p["t"] = rand_tensor({3, 5}, rng);
    p["g"] = rand_tensor({5}, rng, 0.5, 1.5);
    p["b"] = rand_tensor({5}, rng);
    check_op("layer_norm", p, [p] {
      return weighted_sum(layer_norm(p.at("t"), p.at("g"), p.at("b")));
    });
  }
  {
    ParameterSet p;
    p["t"] = rand_tensor({2, 3}, rng, 0.2, 2.0);
    check_op("log", p, [p] { return weighted_sum(log_e(p.at("t"))); });
    // Bounds inside the value range so both the pass-through and the
    // saturated (zero-gradient) branches are exercised.
    check_op("clamp", p, [p] { return weighted_sum(clamp(p.at("t"), 0.5, 1.5)); });
  }
  {
    ParameterSet p;
    p["x"] = rand_tensor({3, 8}, rng);
    p["k"] = rand_tensor({2, 3, 3}, rng);
    check_op("conv1d", p, [p] { return weighted_sum(conv1d(p.at("x"), p.at("k"), 1, 1)); });
    check_op("conv1d_s2", p, [p] { return weighted_sum(conv1d(p.at("x"), p.at("k"), 2, 1)); });
  }
  {
    ParameterSet p;
    p["x"] = rand_tensor({2, 5, 5}, rng);
    p["k"] = rand_tensor({3, 2, 3, 3}, rng);
    check_op("conv2d", p, [p] { return weighted_sum(conv2d(p.at("x"), p.at("k"), 1, 1)); });
    check_op("conv2d_s2", p, [p] { return weighted_sum(conv2d(p.at("x"), p.at("k"), 2, 1)); });
  }
  {
    ParameterSet p;
    p["a"] = rand_tensor({2, 3}, rng);
    p["b"] = rand_tensor({1, 3}, rng);
    check_op("concat", p, [p] {
      return weighted_sum(concat(0, {p.at("a"), p.at("b")}));
    });
  }
  {
    ParameterSet p;
    std::size_t d = 4;
    p["q"] = rand_tensor({3, d}, rng);
    p["kv"] = rand_tensor({5, d}, rng);
    p["wq"] = rand_tensor({d, d}, rng, -0.5, 0.5);
    p["wk"] = rand_tensor({d, d}, rng, -0.5, 0.5);
    p["wv"] = rand_tensor({d, d}, rng, -0.5, 0.5);
    p["wo"] = rand_tensor({d, d}, rng, -0.5, 0.5);
    p["bq"] = rand_tensor({d}, rng);
    p["bk"] = rand_tensor({d}, rng);
    p["bv"] = rand_tensor({d}, rng);
    p["bo"] = rand_tensor({d}, rng);
    check_op("multi_head_attention", p, [p] {
      AttentionWeights w{p.at("wq"), p.at("bq"), p.at("wk"), p.at("bk"),
                         p.at("wv"), p.at("bv"), p.at("wo"), p.at("bo")};
      return weighted_sum(multi_head_attention(p.at("q"), p.at("kv"), p.at("kv"), 2, w));
    });
  }
  {
    ParameterSet p;
    p["s"] = rand_tensor({4}, rng, 0.1, 0.9);
    check_op("bce_loss", p, [p] {
      return bce_loss(p.at("s"), {1.0, 0.0, 1.0, 0.0});
    });
  }
}

TEST_CASE("grad_check negative control trips on a sabotaged gradient") {
  Rng rng(8);
  ParameterSet p;
  p["a"] = rand_tensor({3, 3}, rng);
  p["b"] = rand_tensor({3, 3}, rng);
  auto fwd = [p] { return sum_all(matmul(p.at("a"), p.at("b"))); };
  CHECK(grad_check(fwd, p, 1e-5, 5, 4) <= 1e-6);
  CHECK(grad_check(fwd, p, 1e-5, 5, 4, 1e-2) > 1e-4);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Rng rng(9);
  ParameterSet ps;
  ps["zeta.w"] = rand_tensor({3, 4}, rng);
  ps["alpha.b"] = rand_tensor({7}, rng);
  ps["mid.k"] = rand_tensor({2, 1, 3}, rng);
  auto dir = tmp_dir();
  auto p1 = dir / "a.ckpt";
  auto p2 = dir / "b.ckpt";
  save_checkpoint(p1, ps);
  auto loaded = load_checkpoint(p1);
  REQUIRE(loaded.size() == ps.size());
  for (auto& [name, t] : ps) {
    REQUIRE(loaded.count(name) == 1);
    CHECK(loaded.at(name).shape() == t.shape());
    CHECK(loaded.at(name).values() == t.values());
    CHECK_FALSE(loaded.at(name).requires_grad());
  }
  save_checkpoint(p2, loaded);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(!s1.empty());
  CHECK(s1.substr(0, 4) == "AVTE");

  auto trainable = load_checkpoint(p1, true);
  CHECK(trainable.at("zeta.w").requires_grad());

  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), io_error);
  std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
  bad << "NOPE" << s1.substr(4);
  bad.close();
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), io_error);
  fs::remove_all(dir);
}
