#include "core/lora.hpp"

#include <cmath>
#include <string>

#include "core/common.hpp"

namespace efsa {

AdapterSet AdapterSet::attach(const EncoderParams& encoder, const LoraConfig& cfg,
                              std::uint64_t seed) {
  if (cfg.rank <= 0) fail(ErrorKind::config, "attach: rank must be positive");
  if (!(cfg.scale == cfg.scale) || cfg.scale < 0.0)
    fail(ErrorKind::config, "attach: scaling factor must be a non-negative number");
  AdapterSet set;
  set.cfg_ = cfg;
  set.seed_ = seed;
  for (const auto& layer : encoder.layers) {
    if (cfg.rank > std::min(layer.rows, layer.cols))
      fail(ErrorKind::config, "attach: rank " + std::to_string(cfg.rank) +
                                  " exceeds layer dimensions " + std::to_string(layer.rows) +
                                  "x" + std::to_string(layer.cols));
    set.shapes_.emplace_back(layer.rows, layer.cols);
  }
  set.draw(true);
  return set;
}

void AdapterSet::draw(bool fresh_tensors) {
  Rng rng(seed_);
  if (fresh_tensors) adapters_.assign(shapes_.size(), LoraAdapter{});
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    auto [rows, cols] = shapes_[i];
    std::int64_t r = cfg_.rank;
    double bound = std::sqrt(6.0 / static_cast<double>(r + cols));
    if (fresh_tensors) {
      std::vector<double> down(static_cast<std::size_t>(r * cols));
      for (auto& x : down) x = rng.uniform(-bound, bound);
      adapters_[i].down = Tensor::from_data({r, cols}, std::move(down), true);
      adapters_[i].up = Tensor::zeros({rows, r}, true);
    } else {
      auto down = adapters_[i].down.mutable_data();
      for (auto& x : down) x = rng.uniform(-bound, bound);
      auto up = adapters_[i].up.mutable_data();
      for (auto& x : up) x = 0.0;
    }
  }
}

void AdapterSet::reset() { draw(false); }

std::vector<Tensor> AdapterSet::parameters() const {
  std::vector<Tensor> out;
  out.reserve(adapters_.size() * 2);
  for (const auto& a : adapters_) {
    out.push_back(a.down);
    out.push_back(a.up);
  }
  return out;
}

Tensor effective_weight(const Tensor& base_weight, const LoraAdapter& adapter,
                        const LoraConfig& cfg) {
  if (adapter.up.rows() != base_weight.rows() || adapter.down.cols() != base_weight.cols())
    fail(ErrorKind::shape, "effective_weight: adapter shapes do not match base weight");
  double factor = cfg.scale / static_cast<double>(cfg.rank);
  return add(base_weight, scale(matmul(adapter.up, adapter.down), factor));
}

}  // namespace efsa
