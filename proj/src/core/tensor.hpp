#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace efsa {

namespace detail {
struct Node;
}

// Dense tensor handle participating in a dynamically built computation graph.
// Values are held in double precision internally; persisted artifacts
// (encoder files, pool stores, feature files) stay f32 at the boundary.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::int64_t> shape, bool requires_grad = false);
  static Tensor from_data(std::vector<std::int64_t> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::int64_t>& shape() const;
  std::int64_t numel() const;
  std::int64_t rows() const;
  std::int64_t cols() const;
  bool requires_grad() const;
  void set_requires_grad(bool v);

  std::span<const double> data() const;
  std::span<double> mutable_data();
  // Gradient of the most recent backward() root with respect to this tensor.
  // Empty if this tensor was not part of that graph.
  std::span<const double> grad() const;
  double item() const;

  detail::Node* node() const { return node_.get(); }
  std::shared_ptr<detail::Node> node_ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// C[m x n] = A[m x p] . B[p x n]; entries accumulate over t in ascending order.
Tensor matmul(const Tensor& a, const Tensor& b);
// C[m x n] = A[m x p] . B[n x p]^T (row-by-row dot products).
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// Y[n x out] = X[n x in] . W[out x in]^T + b[out] broadcast over rows.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sum(const Tensor& a);

inline constexpr double kNormEpsilon = 1e-12;

// Divides each row by its l2 norm. 1-D tensors are treated as a single row.
// A row with norm <= kNormEpsilon raises a degenerate-vector error.
Tensor l2_normalize_rows(const Tensor& a);

// Populates grad buffers for every requires_grad tensor reachable from root.
// root must be scalar; each node is visited exactly once.
void backward(const Tensor& root);

// Max over all coordinates of all params of
// |analytic - central_difference| / max(|analytic|, |cd|, 1e-8).
double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double h = 1e-3);

}  // namespace efsa
