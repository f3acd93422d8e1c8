#include <doctest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "testing.hpp"
#include "vda/binary_io.hpp"
#include "vda/checkpoint.hpp"
#include "vda/error.hpp"
#include "vda/graph.hpp"
#include "vda/optim.hpp"
#include "vda/parallel.hpp"
#include "vda/rng.hpp"

using namespace vda;
using vda::testing::check_gradients;
using vda::testing::random_tensor;

namespace {

// Reduces any output to a scalar with fixed random weights so every output
// element gets a distinct upstream gradient.
Var weighted_sum(Graph& g, Var y, std::uint64_t seed = 99) {
  Rng rng(seed);
  const Tensor w = random_tensor(g.value(y).shape(), rng);
  return g.sum(g.mul(y, g.constant(w)));
}

void expect_gradcheck(std::vector<Parameter*> params, const std::function<Var(Graph&)>& build) {
  const auto r = check_gradients(params, build);
  INFO(r.worst);
  CHECK_FALSE(r.missing);
  CHECK(r.checked > 0);
  CHECK(r.max_rel_error < 1e-4);
}

}  // namespace

TEST_CASE("forward: identity, relu, and a seeded MLP against a hand-rolled oracle") {
  Graph g;
  const Tensor x(Shape{3}, std::vector<double>{1.5, -2.0, 0.25});
  CHECK(g.value(g.constant(x)) == x);

  Var r = g.relu(g.constant(Tensor(Shape{2}, std::vector<double>{-1.0, 2.0})));
  CHECK(g.value(r)[0] == 0.0);
  CHECK(g.value(r)[1] == 2.0);

  Rng rng(42);
  const Tensor w1 = random_tensor({4, 5}, rng), b1 = random_tensor({5}, rng);
  const Tensor w2 = random_tensor({5, 3}, rng), b2 = random_tensor({3}, rng);
  Graph m;
  Var h = m.relu(m.linear(m.constant(Tensor({1, 4}, 1.0)), m.constant(w1), m.constant(b1)));
  Var y = m.linear(h, m.constant(w2), m.constant(b2));

  std::vector<double> hid(5), out(3);
  for (int j = 0; j < 5; ++j) {
    double s = b1[j];
    for (int i = 0; i < 4; ++i) s += 1.0 * w1.at(i, j);
    hid[j] = s > 0 ? s : 0.0;
  }
  for (int k = 0; k < 3; ++k) {
    double s = b2[k];
    for (int j = 0; j < 5; ++j) s += hid[j] * w2.at(j, k);
    out[k] = s;
  }
  for (int k = 0; k < 3; ++k) CHECK(std::abs(m.value(y)[k] - out[k]) < 1e-12);
}

TEST_CASE("forward is deterministic") {
  Rng rng(3);
  const Tensor x = random_tensor({2, 3, 6, 6}, rng), w = random_tensor({4, 3, 3, 3}, rng);
  auto run = [&] {
    Graph g;
    return g.value(g.vmax_pool(g.conv2d(g.constant(x), g.constant(w), 1, Padding::same)));
  };
  CHECK(run() == run());
}

TEST_CASE("shape errors name the node") {
  Graph g;
  Var a = g.constant(Tensor({2, 3}));
  Var b = g.constant(Tensor({4, 2}));
  try {
    g.matmul(a, b, "fc7");
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("fc7") != std::string::npos);
  }
}

TEST_CASE("backward: hand examples and contract") {
  Parameter x{"x", Tensor(Shape{2}, std::vector<double>{3.0, 4.0})};
  {
    Graph g;
    const Gradients gr = g.backward(g.sum(g.parameter(x)));
    REQUIRE(gr.find(x));
    CHECK((*gr.find(x))[0] == 1.0);
    CHECK((*gr.find(x))[1] == 1.0);
  }
  {
    Graph g;
    Var v = g.parameter(x);
    const Gradients gr = g.backward(g.sum(g.mul(v, v)));
    CHECK((*gr.find("x"))[0] == doctest::Approx(6.0).epsilon(1e-15));
    CHECK((*gr.find("x"))[1] == doctest::Approx(8.0).epsilon(1e-15));
  }
  {
    Graph g;
    CHECK_THROWS_AS(g.backward(g.parameter(x)), ShapeError);
  }
  {
    Parameter frozen{"frozen", Tensor(Shape{2}, 1.0), false};
    Graph g;
    const Gradients gr = g.backward(g.sum(g.add(g.parameter(x), g.parameter(frozen))));
    CHECK(gr.find(x));
    CHECK_FALSE(gr.find(frozen));
    CHECK(gr.size() == 1);
  }
  {
    Graph g;
    const Gradients gr = g.backward(g.sum(g.parameter(x, false)));
    CHECK(gr.size() == 0);
  }
}

TEST_CASE("gradient check: dense and elementwise ops") {
  Rng rng(11);
  Parameter a{"a", random_tensor({3, 4}, rng)};
  Parameter b{"b", random_tensor({4, 5}, rng)};
  Parameter bias{"bias", random_tensor({5}, rng)};
  Parameter c{"c", random_tensor({3, 4}, rng)};

  SUBCASE("matmul") { expect_gradcheck({&a, &b}, [&](Graph& g) { return weighted_sum(g, g.matmul(g.parameter(a), g.parameter(b))); }); }
  SUBCASE("linear") {
    expect_gradcheck({&a, &b, &bias}, [&](Graph& g) {
      return weighted_sum(g, g.linear(g.parameter(a), g.parameter(b), g.parameter(bias)));
    });
  }
  SUBCASE("add sub mul scale") {
    expect_gradcheck({&a, &c}, [&](Graph& g) {
      Var x = g.parameter(a), y = g.parameter(c);
      return weighted_sum(g, g.scale(g.add(g.mul(x, y), g.sub(x, y)), -1.7));
    });
  }
  SUBCASE("relu and leaky relu") {
    expect_gradcheck({&a}, [&](Graph& g) {
      Var x = g.parameter(a);
      return weighted_sum(g, g.add(g.relu(x), g.leaky_relu(x, 0.2)));
    });
  }
  SUBCASE("softmax") { expect_gradcheck({&a}, [&](Graph& g) { return weighted_sum(g, g.softmax(g.parameter(a))); }); }
  SUBCASE("log_softmax") { expect_gradcheck({&a}, [&](Graph& g) { return weighted_sum(g, g.log_softmax(g.parameter(a))); }); }
  SUBCASE("log") {
    Parameter pos{"pos", testing::random_uniform({3, 4}, rng, 0.5, 2.0)};
    expect_gradcheck({&pos}, [&](Graph& g) { return weighted_sum(g, g.log(g.parameter(pos))); });
  }
  SUBCASE("l2_normalize") { expect_gradcheck({&a}, [&](Graph& g) { return weighted_sum(g, g.l2_normalize(g.parameter(a))); }); }
  SUBCASE("sum mean sum_rows") {
    expect_gradcheck({&a}, [&](Graph& g) {
      Var x = g.parameter(a);
      return g.add(g.add(g.scale(g.sum(x), 0.3), g.mean(g.mul(x, x))), weighted_sum(g, g.sum_rows(g.mul(x, x))));
    });
  }
  SUBCASE("transpose reshape") {
    expect_gradcheck({&a}, [&](Graph& g) {
      return weighted_sum(g, g.reshape(g.transpose(g.parameter(a)), Shape{2, 6}));
    });
  }
  SUBCASE("concat_rows slice_rows") {
    expect_gradcheck({&a, &c}, [&](Graph& g) {
      Var cat = g.concat_rows({g.parameter(a), g.parameter(c)});
      return weighted_sum(g, g.slice_rows(cat, 1, 5));
    });
  }
  SUBCASE("pick") {
    expect_gradcheck({&a}, [&](Graph& g) { return weighted_sum(g, g.pick(g.log_softmax(g.parameter(a)), {0, 3, 1})); });
  }
}

TEST_CASE("gradient check: convolution and pooling ops") {
  Rng rng(12);
  Parameter x{"x", random_tensor({2, 2, 7, 7}, rng)};
  Parameter w{"w", random_tensor({4, 2, 3, 3}, rng, 0.5)};
  Parameter bias{"bias", random_tensor({4}, rng)};

  for (std::size_t stride : {1, 2})
    for (Padding pad : {Padding::same, Padding::valid}) {
      CAPTURE(stride);
      expect_gradcheck({&x, &w, &bias}, [&](Graph& g) {
        return weighted_sum(g, g.add_bias(g.conv2d(g.parameter(x), g.parameter(w), stride, pad), g.parameter(bias)));
      });
    }
  SUBCASE("maxout") { expect_gradcheck({&x}, [&](Graph& g) { return weighted_sum(g, g.maxout(g.parameter(x))); }); }
  SUBCASE("vmax_pool with odd spatial size") {
    expect_gradcheck({&x}, [&](Graph& g) { return weighted_sum(g, g.vmax_pool(g.parameter(x))); });
  }
  SUBCASE("global average pooling") {
    expect_gradcheck({&x}, [&](Graph& g) { return weighted_sum(g, g.global_avg_pool(g.parameter(x))); });
  }
}

TEST_CASE("pooling shapes") {
  Graph g;
  Var x = g.constant(Tensor({1, 4, 5, 6}, 1.0));
  CHECK(g.value(g.maxout(x)).shape() == Shape{1, 2, 5, 6});
  CHECK(g.value(g.vmax_pool(x)).shape() == Shape{1, 2, 3, 3});
  CHECK(g.value(g.global_avg_pool(x)).shape() == Shape{1, 4});
  CHECK_THROWS_AS(g.maxout(g.constant(Tensor({1, 3, 2, 2}))), ShapeError);
}

TEST_CASE("l2_normalize yields unit rows") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const double scale = std::pow(10.0, rng.uniform(-6, 6));
    Graph g;
    const Tensor& y = g.value(g.l2_normalize(g.constant(random_tensor({4, 7}, rng, scale))));
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (std::size_t k = 0; k < 7; ++k) s += y.at(r, k) * y.at(r, k);
      CHECK(std::abs(std::sqrt(s) - 1.0) < 1e-10);
    }
  }
  Graph g;
  const Tensor& z = g.value(g.l2_normalize(g.constant(Tensor({1, 3}))));
  CHECK(z == Tensor({1, 3}));
}

TEST_CASE("log rejects non-positive input") {
  Graph g;
  CHECK_THROWS_AS(g.log(g.constant(Tensor(Shape{2}, std::vector<double>{1.0, 0.0}))), NumericError);
}

TEST_CASE("Adam: deterministic, skips frozen parameters") {
  auto run = [](int steps) {
    Rng rng(8);
    std::vector<Parameter> ps{{"w", random_tensor({3, 3}, rng)}, {"f", random_tensor({3}, rng), false}};
    const Tensor target = random_tensor({3, 3}, rng);
    Adam opt({0.01});
    for (int i = 0; i < steps; ++i) {
      Graph g;
      Var d = g.sub(g.parameter(ps[0]), g.constant(target));
      Var loss = g.add(g.sum(g.mul(d, d)), g.sum(g.parameter(ps[1])));
      opt.step(ps, g.backward(loss));
    }
    return ps;
  };
  const auto first = run(20), second = run(20), start = run(0);
  CHECK(first[0].value == second[0].value);
  CHECK_FALSE(first[0].value == start[0].value);
  CHECK(first[1].value == start[1].value);
}

TEST_CASE("checkpoint round trip and layout") {
  Rng rng(4);
  std::vector<Parameter> ps{{"conv1_1.weight", random_tensor({2, 1, 3, 3}, rng)}, {"conv1_1.bias", Tensor(Shape{2}, 0.5)}};
  const std::string bytes = serialize_checkpoint(ps);
  CHECK(bytes.substr(0, 8) == "VDNPAR01");
  // magic + count + (u16 + name + u8 + dims + data) per entry
  const std::size_t expect = 8 + 4 + (2 + 14 + 1 + 4 * 4 + 18 * 4) + (2 + 12 + 1 + 4 + 2 * 4);
  CHECK(bytes.size() == expect);

  const auto entries = deserialize_checkpoint(bytes);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].name == "conv1_1.weight");
  CHECK(entries[0].value.shape() == Shape{2, 1, 3, 3});
  for (std::size_t i = 0; i < 18; ++i)
    CHECK(entries[0].value[i] == static_cast<double>(static_cast<float>(ps[0].value[i])));

  std::vector<Parameter> copy = ps;
  for (auto& p : copy) p.value.fill(0.0);
  assign_checkpoint(copy, entries);
  CHECK(copy[1].value == ps[1].value);

  CHECK_THROWS_AS(deserialize_checkpoint("VDNPAR02" + bytes.substr(8)), FormatError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);

  std::vector<Parameter> wrong{{"conv1_1.weight", Tensor({2, 1, 5, 5})}, {"conv1_1.bias", Tensor(Shape{2})}};
  try {
    assign_checkpoint(wrong, entries);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("conv1_1") != std::string::npos);
  }
}

TEST_CASE("parameter checksum tracks values") {
  std::vector<Parameter> ps{{"a", Tensor(Shape{3}, 1.0)}};
  const auto before = parameter_checksum(ps);
  CHECK(parameter_checksum(ps) == before);
  ps[0].value[1] = std::nextafter(1.0, 2.0);
  CHECK(parameter_checksum(ps) != before);
}

TEST_CASE("binary reader rejects truncation") {
  ByteWriter w;
  w.u32(7);
  const std::string s = w.take();
  ByteReader r(s.substr(0, 3), "probe");
  CHECK_THROWS_AS(r.u32(), FormatError);
}

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a = Rng::stream(5, 1), b = Rng::stream(5, 1), c = Rng::stream(5, 2);
  const auto x = a.next_u64();
  CHECK(x == b.next_u64());
  CHECK(x != c.next_u64());
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const auto v = r.uniform_int(-2, 3);
    CHECK(v >= -2);
    CHECK(v <= 3);
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  for (std::size_t workers : {1, 3}) {
    set_worker_count(workers);
    std::vector<std::atomic<int>> hits(100);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                      if (i == 7) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
  }
  set_worker_count(0);
  CHECK(worker_count() >= 1);
}
