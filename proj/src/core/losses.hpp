#pragma once

#include "core/tensor.hpp"

namespace efsa {

struct LossConfig {
  double tau = 0.07;
  double margin = 0.2;
  double alpha = 1.7;
  double beta = 0.3;
};

// sims[i][j] = <image_i, text_j> for row-aligned pairs.
Tensor similarity_matrix(const Tensor& image_emb, const Tensor& text_emb);

// Image-anchored InfoNCE over an N x N similarity matrix: mean over rows of
// log-sum-exp(row / tau) - diag / tau, stabilized by row-max subtraction.
Tensor contrastive_from_sims(const Tensor& sims, double tau);

// Mean over rows of sum_{j != i} max(0, margin - sims[i][i] + sims[i][j]),
// with subgradient 0 exactly at the kink.
Tensor hinge_from_sims(const Tensor& sims, double margin);

Tensor contrastive_loss(const Tensor& image_emb, const Tensor& text_emb, double tau);
Tensor hinge_loss(const Tensor& image_emb, const Tensor& text_emb, double margin);

// alpha * contrastive + beta * hinge on a shared similarity matrix.
Tensor combined_loss(const Tensor& image_emb, const Tensor& text_emb, const LossConfig& cfg);

}  // namespace efsa
