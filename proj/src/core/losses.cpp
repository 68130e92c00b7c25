#include "core/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "core/common.hpp"
#include "core/tensor_internal.hpp"

namespace efsa {

using detail::Node;

namespace {

void check_pair(const Tensor& image_emb, const Tensor& text_emb, const char* what) {
  if (!image_emb.defined() || !text_emb.defined())
    fail(ErrorKind::contract, std::string(what) + ": undefined embeddings");
  if (image_emb.shape().size() != 2 || text_emb.shape().size() != 2)
    fail(ErrorKind::shape, std::string(what) + ": embeddings must be N x d matrices");
  if (image_emb.shape() != text_emb.shape())
    fail(ErrorKind::shape, std::string(what) + ": image and text batches differ in shape");
  if (image_emb.rows() == 0) fail(ErrorKind::contract, std::string(what) + ": empty batch");
}

void check_square(const Tensor& sims, const char* what) {
  if (!sims.defined() || sims.shape().size() != 2 || sims.rows() != sims.cols() ||
      sims.rows() == 0)
    fail(ErrorKind::shape, std::string(what) + ": expected a non-empty square matrix");
}

}  // namespace

Tensor similarity_matrix(const Tensor& image_emb, const Tensor& text_emb) {
  check_pair(image_emb, text_emb, "similarity_matrix");
  return matmul_nt(image_emb, text_emb);
}

Tensor contrastive_from_sims(const Tensor& sims, double tau) {
  check_square(sims, "contrastive_loss");
  if (!(tau > 0.0)) fail(ErrorKind::config, "contrastive_loss: temperature must be positive");
  std::int64_t n = sims.rows();
  const double* s = sims.data().data();

  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double* row = s + i * n;
    double row_max = row[0];
    for (std::int64_t j = 1; j < n; ++j) row_max = std::max(row_max, row[j]);
    double denom = 0.0;
    for (std::int64_t j = 0; j < n; ++j) denom += std::exp((row[j] - row_max) / tau);
    total += std::log(denom) + (row_max - row[i]) / tau;
  }
  double loss = total / static_cast<double>(n);

  auto* sn = sims.node();
  return detail::make_node({1}, {sims.node_ptr()}, {loss}, [sn, n, tau](Node& self) {
    double g = self.grad[0];
    const double* s = sn->data.data();
    for (std::int64_t i = 0; i < n; ++i) {
      const double* row = s + i * n;
      double row_max = row[0];
      for (std::int64_t j = 1; j < n; ++j) row_max = std::max(row_max, row[j]);
      double denom = 0.0;
      for (std::int64_t j = 0; j < n; ++j) denom += std::exp((row[j] - row_max) / tau);
      double* grow = sn->grad.data() + i * n;
      double coef = g / (static_cast<double>(n) * tau);
      for (std::int64_t j = 0; j < n; ++j) {
        double p = std::exp((row[j] - row_max) / tau) / denom;
        grow[j] += coef * (p - (j == i ? 1.0 : 0.0));
      }
    }
  });
}

Tensor hinge_from_sims(const Tensor& sims, double margin) {
  check_square(sims, "hinge_loss");
  if (!(margin == margin) || margin < 0.0)
    fail(ErrorKind::config, "hinge_loss: margin must be non-negative");
  std::int64_t n = sims.rows();
  const double* s = sims.data().data();

  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double* row = s + i * n;
    double pos = row[i];
    for (std::int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double term = margin - pos + row[j];
      if (term > 0.0) total += term;
    }
  }
  double loss = total / static_cast<double>(n);

  auto* sn = sims.node();
  return detail::make_node({1}, {sims.node_ptr()}, {loss}, [sn, n, margin](Node& self) {
    double g = self.grad[0];
    const double* s = sn->data.data();
    double coef = g / static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i) {
      const double* row = s + i * n;
      double* grow = sn->grad.data() + i * n;
      double pos = row[i];
      for (std::int64_t j = 0; j < n; ++j) {
        if (j == i) continue;
        if (margin - pos + row[j] > 0.0) {
          grow[j] += coef;
          grow[i] -= coef;
        }
      }
    }
  });
}

Tensor contrastive_loss(const Tensor& image_emb, const Tensor& text_emb, double tau) {
  check_pair(image_emb, text_emb, "contrastive_loss");
  return contrastive_from_sims(similarity_matrix(image_emb, text_emb), tau);
}

Tensor hinge_loss(const Tensor& image_emb, const Tensor& text_emb, double margin) {
  check_pair(image_emb, text_emb, "hinge_loss");
  return hinge_from_sims(similarity_matrix(image_emb, text_emb), margin);
}

Tensor combined_loss(const Tensor& image_emb, const Tensor& text_emb, const LossConfig& cfg) {
  check_pair(image_emb, text_emb, "combined_loss");
  if (cfg.alpha == 0.0 && cfg.beta == 0.0)
    fail(ErrorKind::config, "combined_loss: alpha and beta cannot both be zero");
  Tensor sims = similarity_matrix(image_emb, text_emb);
  return add(scale(contrastive_from_sims(sims, cfg.tau), cfg.alpha),
             scale(hinge_from_sims(sims, cfg.margin), cfg.beta));
}

}  // namespace efsa
