#include "core/tensor.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

#include "core/common.hpp"
#include "core/tensor_internal.hpp"

namespace efsa {

namespace kern {

void mm(const double* a, const double* b, double* c, std::int64_t m, std::int64_t p,
        std::int64_t n) {
  std::vector<double> acc(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < n; ++j) acc[j] = 0.0;
    const double* ai = a + i * p;
    for (std::int64_t t = 0; t < p; ++t) {
      double av = ai[t];
      const double* bt = b + t * n;
      for (std::int64_t j = 0; j < n; ++j) acc[j] += av * bt[j];
    }
    double* ci = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) ci[j] = acc[j];
  }
}

void mm_nt(const double* a, const double* b, double* c, std::int64_t m, std::int64_t p,
           std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * p;
    double* ci = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      ci[j] = dot(ai, b + j * p, p);
    }
  }
}

void mm_tn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t p,
           std::int64_t n) {
  std::vector<double> acc(static_cast<std::size_t>(p * n), 0.0);
  for (std::int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * p;
    const double* bi = b + i * n;
    for (std::int64_t t = 0; t < p; ++t) {
      double av = ai[t];
      double* row = acc.data() + t * n;
      for (std::int64_t j = 0; j < n; ++j) row[j] += av * bi[j];
    }
  }
  for (std::int64_t x = 0; x < p * n; ++x) c[x] = acc[x];
}

double dot(const double* a, const double* b, std::int64_t n) {
  double s = 0.0;
  for (std::int64_t t = 0; t < n; ++t) s += a[t] * b[t];
  return s;
}

}  // namespace kern

namespace detail {

Tensor make_node(std::vector<std::int64_t> shape, std::vector<std::shared_ptr<Node>> parents,
                 std::vector<double> data, std::function<void(Node&)> backprop) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  for (const auto& p : parents) {
    if (p->requires_grad) {
      node->requires_grad = true;
      break;
    }
  }
  node->parents = std::move(parents);
  if (node->requires_grad) node->backprop = std::move(backprop);
  return Tensor(std::move(node));
}

}  // namespace detail

using detail::Node;

namespace {

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void check_defined(const Tensor& t, const char* what) {
  if (!t.defined()) fail(ErrorKind::contract, std::string(what) + ": undefined tensor");
}

void check_matrix(const Tensor& t, const char* what) {
  check_defined(t, what);
  if (t.shape().size() != 2) fail(ErrorKind::shape, std::string(what) + ": expected a 2-D tensor");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  check_defined(a, what);
  check_defined(b, what);
  if (a.shape() != b.shape()) fail(ErrorKind::shape, std::string(what) + ": shape mismatch");
}

std::string dim_str(std::int64_t a, std::int64_t b) {
  return std::to_string(a) + "x" + std::to_string(b);
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::int64_t> shape, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data.assign(static_cast<std::size_t>(shape_numel(node->shape)), 0.0);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_data(std::vector<std::int64_t> shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
    fail(ErrorKind::shape, "from_data: element count does not match shape");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

const std::vector<std::int64_t>& Tensor::shape() const { return node_->shape; }

std::int64_t Tensor::numel() const { return node_->numel(); }

std::int64_t Tensor::rows() const {
  return node_->shape.size() == 2 ? node_->shape[0] : 1;
}

std::int64_t Tensor::cols() const {
  return node_->shape.size() == 2 ? node_->shape[1] : node_->shape[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool v) { node_->requires_grad = v; }

std::span<const double> Tensor::data() const { return node_->data; }

std::span<double> Tensor::mutable_data() { return node_->data; }

std::span<const double> Tensor::grad() const { return node_->grad; }

double Tensor::item() const {
  if (numel() != 1) fail(ErrorKind::contract, "item: tensor is not scalar");
  return node_->data[0];
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_matrix(a, "matmul");
  check_matrix(b, "matmul");
  std::int64_t m = a.rows(), p = a.cols(), n = b.cols();
  if (b.rows() != p)
    fail(ErrorKind::shape,
         "matmul: inner dimensions differ (" + dim_str(m, p) + " vs " + dim_str(b.rows(), n) + ")");
  std::vector<double> out(static_cast<std::size_t>(m * n));
  kern::mm(a.data().data(), b.data().data(), out.data(), m, p, n);
  auto* an = a.node();
  auto* bn = b.node();
  return detail::make_node(
      {m, n}, {a.node_ptr(), b.node_ptr()}, std::move(out), [an, bn, m, p, n](Node& self) {
        if (an->requires_grad) {
          std::vector<double> da(static_cast<std::size_t>(m * p));
          kern::mm_nt(self.grad.data(), bn->data.data(), da.data(), m, n, p);
          for (std::int64_t i = 0; i < m * p; ++i) an->grad[i] += da[i];
        }
        if (bn->requires_grad) {
          std::vector<double> db(static_cast<std::size_t>(p * n));
          kern::mm_tn(an->data.data(), self.grad.data(), db.data(), m, p, n);
          for (std::int64_t i = 0; i < p * n; ++i) bn->grad[i] += db[i];
        }
      });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  check_matrix(a, "matmul_nt");
  check_matrix(b, "matmul_nt");
  std::int64_t m = a.rows(), p = a.cols(), n = b.rows();
  if (b.cols() != p)
    fail(ErrorKind::shape,
         "matmul_nt: inner dimensions differ (" + dim_str(m, p) + " vs " + dim_str(n, b.cols()) +
             ")");
  std::vector<double> out(static_cast<std::size_t>(m * n));
  kern::mm_nt(a.data().data(), b.data().data(), out.data(), m, p, n);
  auto* an = a.node();
  auto* bn = b.node();
  return detail::make_node(
      {m, n}, {a.node_ptr(), b.node_ptr()}, std::move(out), [an, bn, m, p, n](Node& self) {
        if (an->requires_grad) {
          std::vector<double> da(static_cast<std::size_t>(m * p));
          kern::mm(self.grad.data(), bn->data.data(), da.data(), m, n, p);
          for (std::int64_t i = 0; i < m * p; ++i) an->grad[i] += da[i];
        }
        if (bn->requires_grad) {
          std::vector<double> db(static_cast<std::size_t>(n * p));
          kern::mm_tn(self.grad.data(), an->data.data(), db.data(), m, n, p);
          for (std::int64_t i = 0; i < n * p; ++i) bn->grad[i] += db[i];
        }
      });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_matrix(x, "linear");
  check_matrix(w, "linear");
  check_defined(b, "linear");
  std::int64_t n = x.rows(), in = x.cols(), out_dim = w.rows();
  if (w.cols() != in)
    fail(ErrorKind::shape, "linear: weight expects " + std::to_string(w.cols()) +
                               " inputs, got " + std::to_string(in));
  if (b.numel() != out_dim)
    fail(ErrorKind::shape, "linear: bias size " + std::to_string(b.numel()) +
                               " does not match " + std::to_string(out_dim) + " outputs");
  std::vector<double> out(static_cast<std::size_t>(n * out_dim));
  kern::mm_nt(x.data().data(), w.data().data(), out.data(), n, in, out_dim);
  const double* bias = b.data().data();
  for (std::int64_t i = 0; i < n; ++i) {
    double* row = out.data() + i * out_dim;
    for (std::int64_t j = 0; j < out_dim; ++j) row[j] += bias[j];
  }
  auto* xn = x.node();
  auto* wn = w.node();
  auto* bn = b.node();
  return detail::make_node(
      {n, out_dim}, {x.node_ptr(), w.node_ptr(), b.node_ptr()}, std::move(out),
      [xn, wn, bn, n, in, out_dim](Node& self) {
        if (xn->requires_grad) {
          std::vector<double> dx(static_cast<std::size_t>(n * in));
          kern::mm(self.grad.data(), wn->data.data(), dx.data(), n, out_dim, in);
          for (std::int64_t i = 0; i < n * in; ++i) xn->grad[i] += dx[i];
        }
        if (wn->requires_grad) {
          std::vector<double> dw(static_cast<std::size_t>(out_dim * in));
          kern::mm_tn(self.grad.data(), xn->data.data(), dw.data(), n, out_dim, in);
          for (std::int64_t i = 0; i < out_dim * in; ++i) wn->grad[i] += dw[i];
        }
        if (bn->requires_grad) {
          for (std::int64_t j = 0; j < out_dim; ++j) {
            double s = 0.0;
            for (std::int64_t i = 0; i < n; ++i) s += self.grad[i * out_dim + j];
            bn->grad[j] += s;
          }
        }
      });
}

namespace {

Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* what,
                          double (*fwd)(double, double),
                          void (*bwd)(Node&, Node*, Node*)) {
  check_same_shape(a, b, what);
  std::int64_t n = a.numel();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) out[i] = fwd(a.data()[i], b.data()[i]);
  auto* an = a.node();
  auto* bn = b.node();
  return detail::make_node(a.shape(), {a.node_ptr(), b.node_ptr()}, std::move(out),
                           [an, bn, bwd](Node& self) { bwd(self, an, bn); });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](Node& self, Node* an, Node* bn) {
        std::int64_t n = self.numel();
        if (an->requires_grad)
          for (std::int64_t i = 0; i < n; ++i) an->grad[i] += self.grad[i];
        if (bn->requires_grad)
          for (std::int64_t i = 0; i < n; ++i) bn->grad[i] += self.grad[i];
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](Node& self, Node* an, Node* bn) {
        std::int64_t n = self.numel();
        if (an->requires_grad)
          for (std::int64_t i = 0; i < n; ++i) an->grad[i] += self.grad[i];
        if (bn->requires_grad)
          for (std::int64_t i = 0; i < n; ++i) bn->grad[i] -= self.grad[i];
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](Node& self, Node* an, Node* bn) {
        std::int64_t n = self.numel();
        if (an->requires_grad)
          for (std::int64_t i = 0; i < n; ++i) an->grad[i] += self.grad[i] * bn->data[i];
        if (bn->requires_grad)
          for (std::int64_t i = 0; i < n; ++i) bn->grad[i] += self.grad[i] * an->data[i];
      });
}

Tensor scale(const Tensor& a, double c) {
  check_defined(a, "scale");
  std::int64_t n = a.numel();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.data()[i] * c;
  auto* an = a.node();
  return detail::make_node(a.shape(), {a.node_ptr()}, std::move(out), [an, c](Node& self) {
    std::int64_t n = self.numel();
    for (std::int64_t i = 0; i < n; ++i) an->grad[i] += self.grad[i] * c;
  });
}

Tensor tanh(const Tensor& a) {
  check_defined(a, "tanh");
  std::int64_t n = a.numel();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) out[i] = std::tanh(a.data()[i]);
  auto* an = a.node();
  return detail::make_node(a.shape(), {a.node_ptr()}, std::move(out), [an](Node& self) {
    std::int64_t n = self.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      double y = self.data[i];
      an->grad[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor relu(const Tensor& a) {
  check_defined(a, "relu");
  std::int64_t n = a.numel();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  auto* an = a.node();
  return detail::make_node(a.shape(), {a.node_ptr()}, std::move(out), [an](Node& self) {
    std::int64_t n = self.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      if (an->data[i] > 0.0) an->grad[i] += self.grad[i];
    }
  });
}

Tensor sum(const Tensor& a) {
  check_defined(a, "sum");
  std::int64_t n = a.numel();
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) s += a.data()[i];
  auto* an = a.node();
  return detail::make_node({1}, {a.node_ptr()}, {s}, [an, n](Node& self) {
    double g = self.grad[0];
    for (std::int64_t i = 0; i < n; ++i) an->grad[i] += g;
  });
}

Tensor l2_normalize_rows(const Tensor& a) {
  check_defined(a, "l2_normalize_rows");
  if (a.shape().empty() || a.shape().size() > 2)
    fail(ErrorKind::shape, "l2_normalize_rows: expected a 1-D or 2-D tensor");
  std::int64_t r = a.rows(), c = a.cols();
  std::vector<double> out(static_cast<std::size_t>(r * c));
  std::vector<double> norms(static_cast<std::size_t>(r));
  for (std::int64_t i = 0; i < r; ++i) {
    const double* row = a.data().data() + i * c;
    double ss = 0.0;
    for (std::int64_t j = 0; j < c; ++j) ss += row[j] * row[j];
    double norm = std::sqrt(ss);
    if (!(norm > kNormEpsilon))
      fail(ErrorKind::degenerate,
           "l2_normalize_rows: row " + std::to_string(i) + " has near-zero norm");
    norms[i] = norm;
    double* orow = out.data() + i * c;
    for (std::int64_t j = 0; j < c; ++j) orow[j] = row[j] / norm;
  }
  auto* an = a.node();
  return detail::make_node(a.shape(), {a.node_ptr()}, std::move(out),
                           [an, r, c, norms = std::move(norms)](Node& self) {
                             for (std::int64_t i = 0; i < r; ++i) {
                               const double* y = self.data.data() + i * c;
                               const double* g = self.grad.data() + i * c;
                               double gy = kern::dot(g, y, c);
                               double* ga = an->grad.data() + i * c;
                               for (std::int64_t j = 0; j < c; ++j)
                                 ga[j] += (g[j] - y[j] * gy) / norms[i];
                             }
                           });
}

void backward(const Tensor& root) {
  check_defined(root, "backward");
  if (root.numel() != 1) fail(ErrorKind::contract, "backward: root must be scalar");
  Node* root_node = root.node();
  if (!root_node->requires_grad) return;

  // Iterative post-order walk limited to the requires_grad subgraph.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root_node, 0});
  visited.insert(root_node);
  while (!stack.empty()) {
    Frame& f = stack.back();
    bool descended = false;
    while (f.next_parent < f.node->parents.size()) {
      Node* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
        descended = true;
        break;
      }
    }
    if (!descended && (stack.back().next_parent >= stack.back().node->parents.size())) {
      topo.push_back(stack.back().node);
      stack.pop_back();
    }
  }

  for (Node* n : topo) n->grad.assign(static_cast<std::size_t>(n->numel()), 0.0);
  root_node->grad[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double h) {
  if (!(h > 0.0)) fail(ErrorKind::config, "grad_check: step size must be positive");
  Tensor out = f();
  if (out.numel() != 1) fail(ErrorKind::contract, "grad_check: f must return a scalar");
  backward(out);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) {
    auto g = p.grad();
    if (g.empty())
      analytic.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    else
      analytic.emplace_back(g.begin(), g.end());
  }

  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    auto data = p.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      double orig = data[i];
      data[i] = orig + h;
      double lp = f().item();
      data[i] = orig - h;
      double lm = f().item();
      data[i] = orig;
      double cd = (lp - lm) / (2.0 * h);
      double a = analytic[pi][i];
      double denom = std::max({std::fabs(a), std::fabs(cd), 1e-8});
      max_rel = std::max(max_rel, std::fabs(a - cd) / denom);
    }
  }
  return max_rel;
}

}  // namespace efsa
