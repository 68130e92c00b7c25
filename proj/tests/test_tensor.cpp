#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <optional>
#include <vector>

#include "core/common.hpp"
#include "core/tensor.hpp"

using namespace efsa;

namespace {

std::optional<ErrorKind> kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

std::vector<double> random_values(std::uint64_t seed, std::size_t n, double lo = -1.0,
                                  double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& x : out) x = rng.uniform(lo, hi);
  return out;
}

// Reference product with the same f64 ascending accumulation as the kernel.
std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                 std::int64_t m, std::int64_t p, std::int64_t n) {
  std::vector<double> c(static_cast<std::size_t>(m * n), 0.0);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::int64_t t = 0; t < p; ++t)
        s += a[static_cast<std::size_t>(i * p + t)] * b[static_cast<std::size_t>(t * n + j)];
      c[static_cast<std::size_t>(i * n + j)] = s;
    }
  return c;
}

}  // namespace

TEST_CASE("construction and shape accessors") {
  Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.defined());
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.numel() == 6);
  CHECK(t.data()[5] == 6.0);
  CHECK_FALSE(t.requires_grad());

  Tensor z = Tensor::zeros({4}, true);
  CHECK(z.numel() == 4);
  CHECK(z.requires_grad());
  for (double v : z.data()) CHECK(v == 0.0);

  Tensor s = Tensor::scalar(2.5);
  CHECK(s.numel() == 1);
  CHECK(s.item() == 2.5);

  CHECK(kind_of([] { Tensor::from_data({2, 2}, {1, 2, 3}); }) == ErrorKind::shape);
  CHECK(kind_of([&t] { (void)t.item(); }) == ErrorKind::contract);
}

TEST_CASE("matmul matches a triple-loop oracle") {
  const std::int64_t m = 5, p = 7, n = 4;
  auto av = random_values(11, static_cast<std::size_t>(m * p));
  auto bv = random_values(12, static_cast<std::size_t>(p * n));
  auto expect = naive_matmul(av, bv, m, p, n);

  Tensor c = matmul(Tensor::from_data({m, p}, av), Tensor::from_data({p, n}, bv));
  CHECK(c.rows() == m);
  CHECK(c.cols() == n);
  for (std::int64_t i = 0; i < m * n; ++i)
    CHECK(c.data()[i] == doctest::Approx(expect[static_cast<std::size_t>(i)]).epsilon(1e-14));

  CHECK(kind_of([&] {
          matmul(Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}), Tensor::from_data({2, 2}, {1, 2, 3, 4}));
        }) == ErrorKind::shape);
}

TEST_CASE("matmul_nt equals matmul against the explicit transpose") {
  const std::int64_t m = 3, p = 6, n = 5;
  auto av = random_values(21, static_cast<std::size_t>(m * p));
  auto bv = random_values(22, static_cast<std::size_t>(n * p));  // n x p, used transposed
  std::vector<double> bt(static_cast<std::size_t>(p * n));
  for (std::int64_t r = 0; r < n; ++r)
    for (std::int64_t c = 0; c < p; ++c)
      bt[static_cast<std::size_t>(c * n + r)] = bv[static_cast<std::size_t>(r * p + c)];

  Tensor lhs = matmul_nt(Tensor::from_data({m, p}, av), Tensor::from_data({n, p}, bv));
  auto expect = naive_matmul(av, bt, m, p, n);
  for (std::int64_t i = 0; i < m * n; ++i)
    CHECK(lhs.data()[i] == doctest::Approx(expect[static_cast<std::size_t>(i)]).epsilon(1e-14));
}

TEST_CASE("elementwise ops and scale") {
  Tensor a = Tensor::from_data({2, 2}, {1, -2, 3, -4});
  Tensor b = Tensor::from_data({2, 2}, {5, 6, -7, 8});

  Tensor sum_ab = add(a, b);
  Tensor diff = sub(a, b);
  Tensor prod = mul(a, b);
  Tensor half = scale(a, 0.5);
  double ea[] = {6, 4, -4, 4};
  double ed[] = {-4, -8, 10, -12};
  double ep[] = {5, -12, -21, -32};
  for (int i = 0; i < 4; ++i) {
    CHECK(sum_ab.data()[i] == ea[i]);
    CHECK(diff.data()[i] == ed[i]);
    CHECK(prod.data()[i] == ep[i]);
    CHECK(half.data()[i] == a.data()[i] * 0.5);
  }
  CHECK(kind_of([&] { add(a, Tensor::from_data({1, 4}, {1, 2, 3, 4})); }) == ErrorKind::shape);
}

TEST_CASE("tanh and relu forward values") {
  Tensor x = Tensor::from_data({1, 5}, {-2.0, -0.5, 0.0, 0.5, 2.0});
  Tensor t = tanh(x);
  Tensor r = relu(x);
  for (int i = 0; i < 5; ++i) {
    CHECK(t.data()[i] == doctest::Approx(std::tanh(x.data()[i])).epsilon(1e-15));
    CHECK(r.data()[i] == std::max(0.0, x.data()[i]));
  }
}

TEST_CASE("linear applies W x^T plus broadcast bias") {
  // y[r][o] = sum_c x[r][c] * w[o][c] + b[o]
  Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor w = Tensor::from_data({2, 3}, {1, 0, -1, 0.5, 0.5, 0.5});
  Tensor b = Tensor::from_data({2}, {10, 20});
  Tensor y = linear(x, w, b);
  CHECK(y.rows() == 2);
  CHECK(y.cols() == 2);
  CHECK(y.data()[0] == doctest::Approx(1 - 3 + 10));
  CHECK(y.data()[1] == doctest::Approx(0.5 * 6 + 20));
  CHECK(y.data()[2] == doctest::Approx(4 - 6 + 10));
  CHECK(y.data()[3] == doctest::Approx(0.5 * 15 + 20));

  CHECK(kind_of([&] { linear(x, Tensor::from_data({2, 4}, random_values(1, 8)), b); }) ==
        ErrorKind::shape);
  CHECK(kind_of([&] { linear(x, w, Tensor::from_data({3}, {1, 2, 3})); }) == ErrorKind::shape);
}

TEST_CASE("sum reduces every element") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(sum(a).item() == 21.0);
}

TEST_CASE("l2_normalize_rows produces unit rows and flags degenerate input") {
  Tensor a = Tensor::from_data({2, 3}, {3, 0, 4, 1, 1, 1});
  Tensor y = l2_normalize_rows(a);
  CHECK(y.data()[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(y.data()[2] == doctest::Approx(0.8).epsilon(1e-15));
  for (int r = 0; r < 2; ++r) {
    double ss = 0.0;
    for (int c = 0; c < 3; ++c) ss += y.data()[r * 3 + c] * y.data()[r * 3 + c];
    CHECK(std::sqrt(ss) == doctest::Approx(1.0).epsilon(1e-14));
  }

  // 1-D input behaves like a single row.
  Tensor v = l2_normalize_rows(Tensor::from_data({4}, {2, 0, 0, 0}));
  CHECK(v.data()[0] == 1.0);

  CHECK(kind_of([] { l2_normalize_rows(Tensor::zeros({1, 3})); }) == ErrorKind::degenerate);
}

TEST_CASE("backward fills grads only inside the requires_grad subgraph") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4}, true);
  Tensor b = Tensor::from_data({2, 2}, {5, 6, 7, 8});  // constant
  Tensor loss = sum(mul(a, b));
  backward(loss);

  REQUIRE(a.grad().size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(a.grad()[i] == b.data()[i]);
  CHECK(b.grad().empty());

  CHECK(kind_of([&] { backward(mul(a, b)); }) == ErrorKind::contract);
}

TEST_CASE("backward zeroes stale grads instead of accumulating") {
  Tensor a = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
  Tensor loss = sum(mul(a, a));
  backward(loss);
  std::vector<double> first(a.grad().begin(), a.grad().end());

  Tensor loss2 = sum(mul(a, a));
  backward(loss2);
  for (std::size_t i = 0; i < first.size(); ++i) CHECK(a.grad()[i] == first[i]);
}

TEST_CASE("analytic gradients match central differences through a full chain") {
  const std::int64_t n = 3, d_in = 4, d_out = 3;
  Tensor x = Tensor::from_data({n, d_in}, random_values(31, 12));
  Tensor w = Tensor::from_data({d_out, d_in}, random_values(32, 12), true);
  Tensor b = Tensor::from_data({d_out}, random_values(33, 3), true);
  Tensor c = Tensor::from_data({n, d_out}, random_values(34, 9));

  std::vector<Tensor> params = {w, b};
  auto f = [&] { return sum(mul(l2_normalize_rows(tanh(linear(x, w, b))), c)); };
  double err = grad_check(f, params, 1e-5);
  CHECK(err < 1e-7);
}

TEST_CASE("grad_check rejects a bad step size and non-scalar outputs") {
  Tensor a = Tensor::from_data({2}, {1.0, 2.0}, true);
  std::vector<Tensor> params = {a};
  CHECK(kind_of([&] { grad_check([&] { return sum(a); }, params, 0.0); }) == ErrorKind::config);
  CHECK(kind_of([&] { grad_check([&] { return mul(a, a); }, params, 1e-4); }) ==
        ErrorKind::contract);
}
