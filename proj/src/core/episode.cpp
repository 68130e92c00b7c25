#include "core/episode.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "core/common.hpp"

namespace efsa {

AdamW::AdamW(std::vector<Tensor> params, OptimizerConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.lr >= 0.0) || !(cfg_.eps > 0.0) || !(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0) ||
      !(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0) || !(cfg_.weight_decay >= 0.0))
    fail(ErrorKind::config, "adamw: invalid optimizer configuration");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    auto data = params_[pi].mutable_data();
    auto grad = params_[pi].grad();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t i = 0; i < data.size(); ++i) {
      double g = i < grad.size() ? grad[i] : 0.0;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      data[i] -= cfg_.lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps) + cfg_.weight_decay * data[i]);
    }
  }
}

Embedding embed_query(const EncoderParams& text_encoder, const QueryInput& q) {
  if (q.has_embedding) {
    FeatureVector fv;
    fv.values = q.embedding;
    fv.source = FeatureSource::imported;
    return encode(text_encoder, fv);
  }
  FeatureVector fv = featurize_text(q.text, text_encoder.d_in());
  if (fv.degenerate)
    fail(ErrorKind::degenerate, "embed_query: query text has no tokens (" + q.id + ")");
  return encode(text_encoder, fv);
}

RankedList zero_shot_rank(const PoolStore& pool, std::span<const float> query_embedding) {
  return pool.top_k(query_embedding, pool.count());
}

namespace {

Tensor widen_rows(const std::vector<float>& rows, std::int64_t n, std::int64_t d) {
  std::vector<double> data(rows.begin(), rows.end());
  return Tensor::from_data({n, d}, std::move(data));
}

RankedList rank_candidates(const std::vector<std::string>& ids,
                           const std::vector<float>& image_emb, std::int64_t d,
                           std::span<const float> query_emb) {
  std::vector<std::pair<std::size_t, float>> scored(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::span<const float> row(image_emb.data() + i * d, static_cast<std::size_t>(d));
    scored[i] = {i, cosine(query_emb, row)};
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return ids[a.first] < ids[b.first];
  });
  RankedList out;
  out.reserve(scored.size());
  for (const auto& [i, s] : scored) out.push_back({ids[i], s});
  return out;
}

}  // namespace

EpisodeResult run_episode(const PoolStore& pool, const MatrixFile* features,
                          const QueryInput& q, const EpisodeConfig& cfg,
                          const EncoderParams& vision, const EncoderParams& text) {
  auto t0 = std::chrono::steady_clock::now();
  if (cfg.k < 1) fail(ErrorKind::contract, "run_episode: k must be at least 1");
  if (pool.count() < cfg.k)
    fail(ErrorKind::contract, "run_episode: pool has " + std::to_string(pool.count()) +
                                  " rows, fewer than k = " + std::to_string(cfg.k));
  if (cfg.epochs < 0) fail(ErrorKind::contract, "run_episode: epochs must be non-negative");
  if (features && features->dim != vision.d_in())
    fail(ErrorKind::shape, "run_episode: feature dimension does not match vision encoder");
  if (features && features->count != pool.count())
    fail(ErrorKind::shape, "run_episode: feature rows do not match pool rows");

  EpisodeResult res;
  res.query_id = q.id;
  res.vision_adapted = features != nullptr;

  // (1, 2) Encode the query with the base text tower and rank the cached pool.
  Embedding q_emb = embed_query(text, q);
  res.pre_ranking = pool.top_k(q_emb, pool.count());

  // (3) Candidate ids and their cached captions.
  std::vector<std::string> top_ids;
  top_ids.reserve(static_cast<std::size_t>(cfg.k));
  for (std::int64_t i = 0; i < cfg.k; ++i) top_ids.push_back(res.pre_ranking[i].id);
  std::vector<std::string> captions = pool.captions_for(top_ids);

  std::int64_t d_in = vision.d_in();
  std::int64_t n = cfg.k;

  std::vector<float> img_rows;
  if (features) {
    img_rows.reserve(static_cast<std::size_t>(n * d_in));
    for (const auto& id : top_ids) {
      auto row = features->row(pool.row_of(id));
      img_rows.insert(img_rows.end(), row.begin(), row.end());
    }
  }
  std::vector<float> txt_rows;
  txt_rows.reserve(static_cast<std::size_t>(n) * text.d_in());
  for (const auto& c : captions) {
    FeatureVector fv = featurize_text(c, text.d_in());
    txt_rows.insert(txt_rows.end(), fv.values.begin(), fv.values.end());
  }

  // (4) Fresh episode-local adaptation state.
  std::uint64_t episode_seed = cfg.seed ^ fnv1a64(q.id);
  std::optional<AdapterSet> v_ad, t_ad;
  EncoderParams v_full, t_full;
  const EncoderParams* v_eff = &vision;
  const EncoderParams* t_eff = &text;
  std::vector<Tensor> trainable;
  if (cfg.adapt == AdaptMode::lora) {
    if (features) {
      v_ad = AdapterSet::attach(vision, cfg.lora, splitmix64(episode_seed + 1));
      auto ps = v_ad->parameters();
      trainable.insert(trainable.end(), ps.begin(), ps.end());
    }
    t_ad = AdapterSet::attach(text, cfg.lora, splitmix64(episode_seed + 2));
    auto ps = t_ad->parameters();
    trainable.insert(trainable.end(), ps.begin(), ps.end());
  } else {
    if (features) {
      v_full = vision.clone(true);
      v_eff = &v_full;
      auto ps = v_full.parameters();
      trainable.insert(trainable.end(), ps.begin(), ps.end());
    }
    t_full = text.clone(true);
    t_eff = &t_full;
    auto ps = t_full.parameters();
    trainable.insert(trainable.end(), ps.begin(), ps.end());
  }

  // (5) One full-batch step per epoch over the k candidate pairs.
  AdamW opt(trainable, cfg.opt);
  Tensor txt_in = widen_rows(txt_rows, n, text.d_in());
  Tensor img_in;
  std::vector<float> cached_rows;
  if (features) {
    img_in = widen_rows(img_rows, n, d_in);
  } else {
    // No raw features: the cached image embeddings stay fixed and only the
    // text tower adapts.
    cached_rows.reserve(static_cast<std::size_t>(n * pool.dim()));
    for (const auto& id : top_ids) {
      auto row = pool.row(pool.row_of(id));
      cached_rows.insert(cached_rows.end(), row.begin(), row.end());
    }
  }

  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tensor img_emb = features
                         ? encode_forward(*v_eff, img_in, v_ad ? &*v_ad : nullptr)
                         : widen_rows(cached_rows, n, pool.dim());
    Tensor txt_emb = encode_forward(*t_eff, txt_in, t_ad ? &*t_ad : nullptr);
    Tensor loss = combined_loss(img_emb, txt_emb, cfg.loss);
    double lv = loss.item();
    if (!std::isfinite(lv)) {
      res.aborted = true;
      break;
    }
    res.loss_trace.push_back(lv);
    backward(loss);
    opt.step();
  }

  if (res.aborted) {
    // Fall back to the zero-shot order over the same candidate set.
    res.post_ranking.assign(res.pre_ranking.begin(), res.pre_ranking.begin() + n);
  } else {
    // (6) Re-encode the candidates and the query with the adapted towers.
    std::vector<float> img_emb_f;
    if (features) {
      img_emb_f = encode_batch(*v_eff, img_rows.data(), n, v_ad ? &*v_ad : nullptr);
    } else {
      img_emb_f = cached_rows;
    }
    Embedding q_post;
    if (q.has_embedding) {
      q_post = q_emb;
    } else {
      FeatureVector fv = featurize_text(q.text, text.d_in());
      q_post = encode(*t_eff, fv, t_ad ? &*t_ad : nullptr);
    }
    res.post_ranking = rank_candidates(top_ids, img_emb_f, pool.dim(), q_post);
  }

  // (7) Restore the freshly attached state before the episode ends.
  if (v_ad) v_ad->reset();
  if (t_ad) t_ad->reset();

  res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return res;
}

CaptionIndex build_caption_index(const PoolStore& pool, const EncoderParams& text,
                                 int threads) {
  CaptionIndex idx;
  idx.dim = text.d_e();
  idx.emb.assign(static_cast<std::size_t>(pool.count() * idx.dim), 0.0f);
  idx.degenerate.assign(static_cast<std::size_t>(pool.count()), 0);

  std::int64_t d_in = text.d_in();
  parallel_for(pool.count(), threads, 256, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      FeatureVector fv = featurize_text(pool.record(i).caption, d_in);
      if (fv.degenerate) {
        idx.degenerate[static_cast<std::size_t>(i)] = 1;
        continue;
      }
      Embedding e = encode(text, fv);
      std::copy(e.begin(), e.end(), idx.emb.begin() + i * idx.dim);
    }
  });
  return idx;
}

RankedList t2t_rank(const PoolStore& pool, const CaptionIndex& index,
                    const EncoderParams& text, const std::string& query_text) {
  if (pool.count() == 0) fail(ErrorKind::contract, "t2t_rank: empty store");
  if (static_cast<std::int64_t>(index.degenerate.size()) != pool.count())
    fail(ErrorKind::shape, "t2t_rank: caption index does not match pool");
  FeatureVector fv = featurize_text(query_text, text.d_in());
  if (fv.degenerate) fail(ErrorKind::degenerate, "t2t_rank: query text has no tokens");
  Embedding q = encode(text, fv);

  // Degenerate captions score below the cosine range so they always land
  // behind every real caption, ordered among themselves by id.
  constexpr float kDegenerateScore = -2.0f;
  std::vector<std::pair<std::int64_t, float>> scored(static_cast<std::size_t>(pool.count()));
  for (std::int64_t i = 0; i < pool.count(); ++i) {
    float s = index.degenerate[static_cast<std::size_t>(i)]
                  ? kDegenerateScore
                  : cosine(std::span<const float>(q),
                           std::span<const float>(index.emb.data() + i * index.dim,
                                                  static_cast<std::size_t>(index.dim)));
    scored[static_cast<std::size_t>(i)] = {i, s};
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return pool.record(a.first).id < pool.record(b.first).id;
  });
  RankedList out;
  out.reserve(scored.size());
  for (const auto& [i, s] : scored) out.push_back({pool.record(i).id, s});
  return out;
}

RankedList t2t_rank(const PoolStore& pool, const EncoderParams& text,
                    const std::string& query_text) {
  CaptionIndex idx = build_caption_index(pool, text);
  return t2t_rank(pool, idx, text, query_text);
}

FinetunedModel finetune_baseline(const PoolStore& pool, const MatrixFile& features,
                                 const EncoderParams& vision, const EncoderParams& text,
                                 const FinetuneConfig& cfg) {
  if (cfg.epochs < 0) fail(ErrorKind::contract, "finetune: epochs must be non-negative");
  if (cfg.batch < 1) fail(ErrorKind::config, "finetune: batch size must be at least 1");
  if (features.count != pool.count())
    fail(ErrorKind::shape, "finetune: feature rows do not match pool rows");
  if (features.dim != vision.d_in())
    fail(ErrorKind::shape, "finetune: feature dimension does not match vision encoder");

  FinetunedModel model{
      AdapterSet::attach(vision, cfg.lora, splitmix64(cfg.seed + 101)),
      AdapterSet::attach(text, cfg.lora, splitmix64(cfg.seed + 102)),
      {}};
  std::vector<Tensor> trainable = model.vision_adapters.parameters();
  auto tp = model.text_adapters.parameters();
  trainable.insert(trainable.end(), tp.begin(), tp.end());
  AdamW opt(trainable, cfg.opt);

  std::int64_t n = pool.count();
  std::int64_t d_in = vision.d_in();
  std::int64_t d_txt = text.d_in();

  // Featurized captions are reused every epoch.
  std::vector<float> caption_rows(static_cast<std::size_t>(n * d_txt));
  for (std::int64_t i = 0; i < n; ++i) {
    FeatureVector fv = featurize_text(pool.record(i).caption, d_txt);
    std::copy(fv.values.begin(), fv.values.end(), caption_rows.begin() + i * d_txt);
  }

  Rng shuffle_rng(splitmix64(cfg.seed + 103));
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::int64_t i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_index(i + 1)]);
    double epoch_loss = 0.0;
    std::int64_t n_batches = 0;
    for (std::int64_t lo = 0; lo < n; lo += cfg.batch) {
      std::int64_t b = std::min(cfg.batch, n - lo);
      std::vector<double> img(static_cast<std::size_t>(b * d_in));
      std::vector<double> txt(static_cast<std::size_t>(b * d_txt));
      for (std::int64_t r = 0; r < b; ++r) {
        std::int64_t src = order[static_cast<std::size_t>(lo + r)];
        auto frow = features.row(src);
        for (std::int64_t j = 0; j < d_in; ++j) img[r * d_in + j] = frow[j];
        for (std::int64_t j = 0; j < d_txt; ++j)
          txt[r * d_txt + j] = caption_rows[src * d_txt + j];
      }
      Tensor img_emb = encode_forward(vision, Tensor::from_data({b, d_in}, std::move(img)),
                                      &model.vision_adapters);
      Tensor txt_emb = encode_forward(text, Tensor::from_data({b, d_txt}, std::move(txt)),
                                      &model.text_adapters);
      Tensor loss = combined_loss(img_emb, txt_emb, cfg.loss);
      double lv = loss.item();
      if (!std::isfinite(lv))
        fail(ErrorKind::training, "finetune: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += lv;
      ++n_batches;
      backward(loss);
      opt.step();
    }
    model.epoch_losses.push_back(n_batches > 0 ? epoch_loss / n_batches : 0.0);
  }
  return model;
}

TrainedEncoders train_base(const MatrixFile& features,
                           std::span<const ManifestRecord> manifest, const TrainConfig& cfg) {
  if (features.count != static_cast<std::int64_t>(manifest.size()))
    fail(ErrorKind::shape, "train_base: feature rows do not match manifest");
  if (features.count == 0) fail(ErrorKind::contract, "train_base: no training pairs");
  if (cfg.batch < 2) fail(ErrorKind::config, "train_base: batch must be at least 2");
  if (features.dim != cfg.dims.d_in)
    fail(ErrorKind::shape, "train_base: features have dimension " +
                               std::to_string(features.dim) + ", expected " +
                               std::to_string(cfg.dims.d_in));

  TrainedEncoders out;
  out.vision = init_encoder(splitmix64(cfg.seed + 11), cfg.dims, cfg.nonlinearity);
  out.text = init_encoder(splitmix64(cfg.seed + 12), cfg.dims, cfg.nonlinearity);
  out.vision.set_requires_grad(true);
  out.text.set_requires_grad(true);

  std::int64_t n = features.count;
  std::int64_t d_in = cfg.dims.d_in;
  std::vector<float> caption_rows(static_cast<std::size_t>(n * d_in));
  for (std::int64_t i = 0; i < n; ++i) {
    FeatureVector fv = featurize_text(manifest[i].caption, d_in);
    std::copy(fv.values.begin(), fv.values.end(), caption_rows.begin() + i * d_in);
  }

  std::vector<Tensor> trainable = out.vision.parameters();
  auto tp = out.text.parameters();
  trainable.insert(trainable.end(), tp.begin(), tp.end());
  OptimizerConfig opt_cfg;
  opt_cfg.lr = cfg.lr;
  opt_cfg.weight_decay = cfg.weight_decay;
  AdamW opt(trainable, opt_cfg);

  Rng batch_rng(splitmix64(cfg.seed + 13));
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    std::int64_t b = cfg.batch;
    std::vector<double> img(static_cast<std::size_t>(b * d_in));
    std::vector<double> txt(static_cast<std::size_t>(b * d_in));
    for (std::int64_t r = 0; r < b; ++r) {
      std::int64_t src = batch_rng.uniform_index(n);
      auto frow = features.row(src);
      for (std::int64_t j = 0; j < d_in; ++j) img[r * d_in + j] = frow[j];
      for (std::int64_t j = 0; j < d_in; ++j) txt[r * d_in + j] = caption_rows[src * d_in + j];
    }
    Tensor img_emb = encode_forward(out.vision, Tensor::from_data({b, d_in}, std::move(img)));
    Tensor txt_emb = encode_forward(out.text, Tensor::from_data({b, d_in}, std::move(txt)));
    Tensor loss = contrastive_loss(img_emb, txt_emb, cfg.tau);
    double lv = loss.item();
    if (!std::isfinite(lv))
      fail(ErrorKind::training, "train_base: non-finite loss at step " + std::to_string(step));
    out.loss_trace.push_back(lv);
    backward(loss);
    opt.step();
  }

  out.vision.set_requires_grad(false);
  out.text.set_requires_grad(false);
  return out;
}

}  // namespace efsa
