#pragma once

#include <cstdint>
#include <vector>

#include "core/encoder.hpp"
#include "core/tensor.hpp"

namespace efsa {

struct LoraConfig {
  std::int64_t rank = 4;
  double scale = 15.0;
};

// Low-rank pair for one linear layer: effective weight is
// W + (scale / rank) * up . down, with the base W never mutated.
struct LoraAdapter {
  Tensor down;  // rank x cols, Xavier-initialized
  Tensor up;    // rows x rank, zero-initialized so attachment is an identity
};

class AdapterSet {
 public:
  // One adapter pair per encoder layer. Deterministic in seed.
  static AdapterSet attach(const EncoderParams& encoder, const LoraConfig& cfg,
                           std::uint64_t seed);

  // Returns to the freshly attached state: up zeroed, down redrawn from the
  // original seed.
  void reset();

  std::size_t size() const { return adapters_.size(); }
  const LoraAdapter& at(std::size_t i) const { return adapters_[i]; }
  const LoraConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }

  // Trainable tensors in fixed order: down0, up0, down1, up1, ...
  std::vector<Tensor> parameters() const;

 private:
  LoraConfig cfg_;
  std::uint64_t seed_ = 0;
  std::vector<LoraAdapter> adapters_;
  std::vector<std::pair<std::int64_t, std::int64_t>> shapes_;  // per layer rows, cols

  void draw(bool fresh_tensors);
};

Tensor effective_weight(const Tensor& base_weight, const LoraAdapter& adapter,
                        const LoraConfig& cfg);

}  // namespace efsa
