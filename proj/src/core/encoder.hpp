#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core/tensor.hpp"

namespace efsa {

class AdapterSet;

enum class Nonlinearity { tanh, relu };

enum class FeatureSource { image_synthetic, text_hashed, imported };

// Raw model input. values has dimension d_in for encoder inputs, or d_e for
// imported embeddings that bypass the encoder body.
struct FeatureVector {
  std::vector<float> values;
  FeatureSource source = FeatureSource::image_synthetic;
  bool degenerate = false;
};

// Unit-norm f32 embedding of dimension d_e.
using Embedding = std::vector<float>;

struct LinearLayer {
  Tensor weight;  // rows x cols, maps cols inputs to rows outputs
  Tensor bias;    // rows
  std::int64_t rows = 0;
  std::int64_t cols = 0;
};

struct EncoderDims {
  std::int64_t d_in = 256;
  std::int64_t d_hidden = 256;  // 0 means a single linear layer
  std::int64_t d_e = 64;
};

struct EncoderParams {
  std::vector<LinearLayer> layers;
  Nonlinearity nonlinearity = Nonlinearity::tanh;

  std::int64_t d_in() const;
  std::int64_t d_e() const;
  std::vector<Tensor> parameters() const;
  void set_requires_grad(bool v);
  EncoderParams clone(bool requires_grad) const;
};

// Lowercases, splits on non-alphanumeric runs, hashes each token with FNV-1a
// 64 into d_in buckets, accumulates counts, l2-normalizes. Empty token sets
// produce a zero vector flagged degenerate.
FeatureVector featurize_text(std::string_view text, std::int64_t d_in);

// Xavier-uniform weights, zero biases, deterministic in seed.
EncoderParams init_encoder(std::uint64_t seed, const EncoderDims& dims,
                           Nonlinearity nl = Nonlinearity::tanh);

// Differentiable forward over a batch of raw feature rows (n x d_in).
// When adapters are attached, each layer uses its adapted effective weight.
Tensor encode_forward(const EncoderParams& params, const Tensor& x,
                      const AdapterSet* adapters = nullptr);

Embedding encode(const EncoderParams& params, const FeatureVector& input,
                 const AdapterSet* adapters = nullptr);

// Encodes n feature rows (row-major f32, d_in wide) into n unit-norm rows of
// width d_e. Chunked; output is bit-identical for any thread count.
std::vector<float> encode_batch(const EncoderParams& params, const float* features,
                                std::int64_t n, const AdapterSet* adapters = nullptr,
                                int threads = 1);

void save_encoder(const EncoderParams& params, const std::string& path);
EncoderParams load_encoder(const std::string& path, Nonlinearity nl = Nonlinearity::tanh);

Nonlinearity nonlinearity_from_name(std::string_view name);

}  // namespace efsa
