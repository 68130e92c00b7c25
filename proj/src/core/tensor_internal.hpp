#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "core/tensor.hpp"

// Graph internals shared between tensor.cpp and the fused loss kernels in
// losses.cpp. Not part of the module surface.

namespace efsa::detail {

struct Node {
  std::vector<std::int64_t> shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad buffer and accumulates into the parents'.
  std::function<void(Node&)> backprop;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

Tensor make_node(std::vector<std::int64_t> shape, std::vector<std::shared_ptr<Node>> parents,
                 std::vector<double> data, std::function<void(Node&)> backprop);

}  // namespace efsa::detail

namespace efsa::kern {

// C[m x n] = A[m x p] . B[p x n], ascending-t accumulation per entry.
void mm(const double* a, const double* b, double* c, std::int64_t m, std::int64_t p,
        std::int64_t n);
// C[m x n] = A[m x p] . B[n x p]^T.
void mm_nt(const double* a, const double* b, double* c, std::int64_t m, std::int64_t p,
           std::int64_t n);
// C[p x n] = A[m x p]^T . B[m x n], ascending-i accumulation per entry.
void mm_tn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t p,
           std::int64_t n);
double dot(const double* a, const double* b, std::int64_t n);

}  // namespace efsa::kern
