#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/encoder.hpp"
#include "core/lora.hpp"
#include "core/losses.hpp"
#include "core/pool.hpp"
#include "core/tensor.hpp"

namespace efsa {

struct OptimizerConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled-weight-decay Adam over a fixed parameter list.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, OptimizerConfig cfg);

  // Applies one update from the gradients currently on the parameters.
  void step();
  std::int64_t steps_taken() const { return t_; }

 private:
  std::vector<Tensor> params_;
  OptimizerConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t t_ = 0;
};

enum class AdaptMode { lora, full };

struct EpisodeConfig {
  std::int64_t k = 16;
  std::int64_t epochs = 1;
  LossConfig loss;
  LoraConfig lora;
  OptimizerConfig opt;
  std::uint64_t seed = 42;
  AdaptMode adapt = AdaptMode::lora;
};

struct QueryInput {
  std::string id;
  std::string text;
  std::vector<float> embedding;  // optional pre-computed query embedding
  bool has_embedding = false;
};

struct EpisodeResult {
  std::string query_id;
  RankedList pre_ranking;   // full pool, cached embeddings, base text encoder
  RankedList post_ranking;  // the top-k candidates re-ranked by adapted encoders
  std::vector<double> loss_trace;
  double wall_ms = 0.0;
  bool aborted = false;         // non-finite loss; fell back to zero-shot order
  bool vision_adapted = false;  // false when raw features are unavailable
};

Embedding embed_query(const EncoderParams& text_encoder, const QueryInput& q);

RankedList zero_shot_rank(const PoolStore& pool, std::span<const float> query_embedding);

// One retrieval episode: rank with cached embeddings, adapt fresh adapters on
// the top-k (image, caption) pairs, re-rank the candidates, reset. Base
// encoders and the pool are read-only throughout.
EpisodeResult run_episode(const PoolStore& pool, const MatrixFile* features,
                          const QueryInput& q, const EpisodeConfig& cfg,
                          const EncoderParams& vision, const EncoderParams& text);

// Cached caption embeddings for caption-space retrieval; degenerate captions
// are flagged and always rank last.
struct CaptionIndex {
  std::vector<float> emb;
  std::vector<char> degenerate;
  std::int64_t dim = 0;
};

CaptionIndex build_caption_index(const PoolStore& pool, const EncoderParams& text,
                                 int threads = 1);
RankedList t2t_rank(const PoolStore& pool, const CaptionIndex& index,
                    const EncoderParams& text, const std::string& query_text);
RankedList t2t_rank(const PoolStore& pool, const EncoderParams& text,
                    const std::string& query_text);

struct FinetuneConfig {
  std::int64_t epochs = 4;
  std::int64_t batch = 64;
  LossConfig loss;
  LoraConfig lora;
  OptimizerConfig opt;
  std::uint64_t seed = 42;
};

// Persistent LoRA fine-tune over the whole pool; adapters are kept (no reset).
struct FinetunedModel {
  AdapterSet vision_adapters;
  AdapterSet text_adapters;
  std::vector<double> epoch_losses;
};

FinetunedModel finetune_baseline(const PoolStore& pool, const MatrixFile& features,
                                 const EncoderParams& vision, const EncoderParams& text,
                                 const FinetuneConfig& cfg);

struct TrainConfig {
  EncoderDims dims;
  Nonlinearity nonlinearity = Nonlinearity::tanh;
  std::int64_t steps = 3000;
  std::int64_t batch = 48;
  double lr = 0.01;
  double tau = 0.07;
  double weight_decay = 0.0;
  std::uint64_t seed = 42;
};

struct TrainedEncoders {
  EncoderParams vision;
  EncoderParams text;
  std::vector<double> loss_trace;
};

// Contrastive training of both towers from scratch on (feature, caption)
// pairs. Deterministic in seed; diverging loss raises a training error.
TrainedEncoders train_base(const MatrixFile& features,
                           std::span<const ManifestRecord> manifest, const TrainConfig& cfg);

}  // namespace efsa
