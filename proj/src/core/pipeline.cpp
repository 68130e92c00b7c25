#include "core/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "core/bench.hpp"
#include "core/common.hpp"
#include "core/encoder.hpp"
#include "core/episode.hpp"
#include "core/eval.hpp"

namespace efsa {

namespace {

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot open " + path);
  f << content;
  if (!f) fail(ErrorKind::io, "write failed for " + path);
}

void write_resolved(const RunConfig& cfg, const std::string& command) {
  Artifacts art(cfg.out_dir);
  write_text_file(art.resolved_config(command), serialize(cfg));
}

std::uint64_t hash_file(const std::string& path, std::uint64_t state) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot hash " + path);
  char buf[65536];
  while (f.read(buf, sizeof(buf)) || f.gcount() > 0)
    state = fnv1a64(buf, static_cast<std::size_t>(f.gcount()), state);
  return state;
}

BenchConfig bench_config_from(const RunConfig& c) {
  BenchConfig b;
  b.d_in = c.bench_d_in;
  b.n_domains = c.bench_domains;
  b.items_per_domain = c.bench_items_per_domain;
  b.hard_group_size = c.bench_hard_group_size;
  b.shared_attrs = c.bench_shared_attrs;
  b.attr_vocab_size = c.bench_attr_vocab;
  b.noise_sigma = c.bench_noise_sigma;
  b.n_queries_per_domain = c.bench_queries_per_domain;
  b.n_distractors = c.bench_distractors;
  b.caption_noise_words = c.bench_caption_noise_words;
  b.caption_shared_mentions = c.bench_caption_shared_mentions;
  b.query_shared_mentions = c.bench_query_shared_mentions;
  b.seed = c.bench_seed;
  b.domain_scale = c.bench_domain_scale;
  b.attr_scale = c.bench_attr_scale;
  b.distinct_scale = c.bench_distinct_scale;
  b.background_scale = c.bench_background_scale;
  return b;
}

std::vector<Method> parse_methods(const std::string& text) {
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find_first_of("+,", start);
    if (end == std::string::npos) end = text.size();
    std::string tok = text.substr(start, end - start);
    while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.erase(0, 1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.pop_back();
    if (!tok.empty()) out.push_back(method_from_name(tok));
    if (end == text.size()) break;
    start = end + 1;
  }
  if (out.empty()) fail(ErrorKind::config, "eval_methods named no methods");
  return out;
}

SuiteConfig suite_config_from(const RunConfig& c) {
  SuiteConfig sc;
  sc.episode.k = c.episode_k;
  sc.episode.epochs = c.episode_epochs;
  sc.episode.seed = c.episode_seed;
  sc.episode.adapt = c.adapt_mode == "full" ? AdaptMode::full : AdaptMode::lora;
  sc.episode.loss = {c.loss_tau, c.loss_margin, c.loss_alpha, c.loss_beta};
  sc.episode.lora = {c.lora_rank, c.lora_scale};
  sc.episode.opt = {c.opt_lr, c.opt_beta1, c.opt_beta2, c.opt_eps, c.opt_weight_decay};
  sc.finetune.epochs = c.ft_epochs;
  sc.finetune.batch = c.ft_batch;
  sc.finetune.loss = sc.episode.loss;
  sc.finetune.lora = sc.episode.lora;
  sc.finetune.opt = {c.ft_lr, c.opt_beta1, c.opt_beta2, c.opt_eps, c.opt_weight_decay};
  sc.finetune.seed = c.ft_seed;
  sc.methods = parse_methods(c.eval_methods);
  sc.threads = static_cast<int>(c.threads);
  sc.collect_exports = c.eval_export_episodes;
  sc.config_digest = config_digest(c);
  return sc;
}

struct EvalInputs {
  PoolStore pool;
  MatrixFile features;
  EncoderParams vision;
  EncoderParams text;
  std::vector<QueryRecord> queries;
};

EvalInputs load_eval_inputs(const RunConfig& cfg) {
  Artifacts art(cfg.out_dir);
  Nonlinearity nl = nonlinearity_from_name(cfg.enc_nonlinearity);
  EvalInputs in;
  in.pool = PoolStore::load(art.pool(), art.manifest());
  in.features = read_matrix_file(art.features(), kFeatureMagic);
  in.vision = load_encoder(art.vision_encoder(), nl);
  in.text = load_encoder(art.text_encoder(), nl);
  in.queries = read_queries(art.queries());
  if (in.features.count != in.pool.count())
    fail(ErrorKind::contract, "feature rows and pool rows disagree; regenerate artifacts");
  return in;
}

std::string format_metric(double v) {
  if (v == std::floor(v) && std::fabs(v) < 9.0e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.8f", v);
  return buf;
}

}  // namespace

GenOutcome cmd_gen(const RunConfig& cfg) {
  validate(cfg);
  Artifacts art(cfg.out_dir);
  std::filesystem::create_directories(art.root);
  BenchData data = generate(bench_config_from(cfg));
  write_matrix_file(art.features(), kFeatureMagic, data.features);
  write_manifest(art.manifest(), data.manifest);
  write_queries(art.queries(), data.queries);
  write_resolved(cfg, "gen");

  GenOutcome out;
  out.files = {art.features(), art.manifest(), art.queries()};
  std::uint64_t h = kFnvOffset;
  for (const auto& f : out.files) h = hash_file(f, h);
  out.digest = hex_u64(h);
  return out;
}

void cmd_train_base(const RunConfig& cfg) {
  validate(cfg);
  Artifacts art(cfg.out_dir);
  std::filesystem::create_directories(art.root);
  MatrixFile features = read_matrix_file(art.features(), kFeatureMagic);
  std::vector<ManifestRecord> manifest = read_manifest(art.manifest());

  if (!cfg.train_include_distractors) {
    // Background rows pair random captions with random features; there is
    // nothing cross-modal to learn from them, and they drown out the real
    // pairs at the default pool mix, so pre-training skips them.
    MatrixFile kept;
    kept.dim = features.dim;
    std::vector<ManifestRecord> kept_manifest;
    for (std::int64_t i = 0; i < features.count; ++i) {
      if (manifest[static_cast<std::size_t>(i)].domain == kOpenDomain) continue;
      auto row = features.row(i);
      kept.data.insert(kept.data.end(), row.begin(), row.end());
      kept_manifest.push_back(manifest[static_cast<std::size_t>(i)]);
    }
    kept.count = static_cast<std::int64_t>(kept_manifest.size());
    if (kept.count == 0)
      fail(ErrorKind::contract,
           "train-base: no non-distractor rows; set train_include_distractors=true");
    features = std::move(kept);
    manifest = std::move(kept_manifest);
  }

  TrainConfig tc;
  tc.dims = {features.dim, cfg.enc_hidden, cfg.enc_out};
  tc.nonlinearity = nonlinearity_from_name(cfg.enc_nonlinearity);
  tc.steps = cfg.train_steps;
  tc.batch = cfg.train_batch;
  tc.lr = cfg.train_lr;
  tc.tau = cfg.train_tau;
  tc.weight_decay = cfg.train_weight_decay;
  tc.seed = cfg.train_seed;

  TrainedEncoders trained = train_base(features, manifest, tc);
  save_encoder(trained.vision, art.vision_encoder());
  save_encoder(trained.text, art.text_encoder());
  write_resolved(cfg, "train-base");
}

void cmd_index(const RunConfig& cfg) {
  validate(cfg);
  Artifacts art(cfg.out_dir);
  std::filesystem::create_directories(art.root);
  MatrixFile features = read_matrix_file(art.features(), kFeatureMagic);
  std::vector<ManifestRecord> manifest = read_manifest(art.manifest());
  EncoderParams vision =
      load_encoder(art.vision_encoder(), nonlinearity_from_name(cfg.enc_nonlinearity));
  if (features.dim != vision.d_in())
    fail(ErrorKind::contract, "feature dim does not match the vision encoder input");
  std::vector<float> embeddings =
      encode_batch(vision, features.data.data(), features.count, nullptr,
                   static_cast<int>(cfg.threads));
  PoolStore pool = PoolStore::build(std::move(embeddings), vision.d_e(), std::move(manifest));
  pool.save(art.pool(), art.manifest());
  write_resolved(cfg, "index");
}

void cmd_eval(const RunConfig& cfg) {
  validate(cfg);
  Artifacts art(cfg.out_dir);
  EvalInputs in = load_eval_inputs(cfg);
  std::filesystem::create_directories(art.reports());
  SuiteConfig sc = suite_config_from(cfg);

  SuiteResult multi = run_suite(in.pool, &in.features, in.vision, in.text, in.queries, sc);
  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("setting", "multi_domain");
  meta.insert(meta.end(), multi.metadata.begin(), multi.metadata.end());
  write_report_csv(art.reports() + "/report_multi.csv", multi.rows);
  write_report_kv(art.reports() + "/report_multi.kv", multi.rows, meta);
  if (sc.collect_exports)
    write_episode_exports(art.reports() + "/episodes_multi.tsv", multi.exports);

  if (cfg.eval_single_domain) {
    std::vector<std::string> domain_order;
    for (const auto& q : in.queries)
      if (std::find(domain_order.begin(), domain_order.end(), q.domain) ==
          domain_order.end())
        domain_order.push_back(q.domain);

    SuiteConfig per_domain_cfg = sc;
    per_domain_cfg.collect_exports = false;
    std::unordered_map<std::string, std::vector<RecallRow>> by_method;
    std::vector<std::pair<std::string, std::string>> smeta;
    smeta.emplace_back("setting", "single_domain");
    smeta.emplace_back("domains", std::to_string(domain_order.size()));
    for (const auto& dom : domain_order) {
      std::vector<std::int64_t> rows = in.pool.rows_for_domain(dom);
      PoolStore sub_pool = in.pool.subset(rows);
      MatrixFile sub_features;
      sub_features.dim = in.features.dim;
      sub_features.count = static_cast<std::int64_t>(rows.size());
      for (std::int64_t r : rows) {
        auto row = in.features.row(r);
        sub_features.data.insert(sub_features.data.end(), row.begin(), row.end());
      }
      std::vector<QueryRecord> sub_queries;
      for (const auto& q : in.queries)
        if (q.domain == dom) sub_queries.push_back(q);
      if (sub_queries.empty()) continue;
      SuiteResult res = run_suite(sub_pool, &sub_features, in.vision, in.text, sub_queries,
                                  per_domain_cfg);
      for (const auto& row : res.rows)
        if (row.domain != "average") by_method[row.method].push_back(row);
      smeta.emplace_back("pool_size." + dom, std::to_string(sub_pool.count()));
    }

    std::vector<RecallRow> srows;
    for (Method m : sc.methods) {
      std::string label(method_label(m));
      const auto& rows = by_method[label];
      double s1 = 0, s5 = 0, s10 = 0;
      for (const auto& row : rows) {
        srows.push_back(row);
        s1 += row.r1;
        s5 += row.r5;
        s10 += row.r10;
      }
      if (rows.empty()) continue;
      double nd = static_cast<double>(rows.size());
      srows.push_back({"average", label, s1 / nd, s5 / nd, s10 / nd});
    }
    smeta.emplace_back("config_digest", sc.config_digest);
    write_report_csv(art.reports() + "/report_single.csv", srows);
    write_report_kv(art.reports() + "/report_single.kv", srows, smeta);
  }
  write_resolved(cfg, "eval");
}

void cmd_ablate(const RunConfig& cfg, const std::string& which) {
  validate(cfg);
  Artifacts art(cfg.out_dir);
  EvalInputs in = load_eval_inputs(cfg);
  std::filesystem::create_directories(art.reports());
  SuiteConfig sc = suite_config_from(cfg);

  AblationReport rep;
  if (which == "topk") {
    std::vector<std::int64_t> ks = parse_int_list(cfg.ablate_ks, "ablate_ks");
    rep = ablate_topk(in.pool, &in.features, in.vision, in.text, in.queries, sc, ks);
  } else if (which == "epochs") {
    std::vector<std::int64_t> epochs =
        parse_int_list(cfg.ablate_epoch_counts, "ablate_epoch_counts");
    rep = ablate_epochs(in.pool, &in.features, in.vision, in.text, in.queries, sc, epochs);
  } else if (which == "loss") {
    rep = ablate_loss(in.pool, &in.features, in.vision, in.text, in.queries, sc);
  } else if (which == "lora") {
    rep = ablate_lora_vs_full(in.pool, &in.features, in.vision, in.text, in.queries, sc);
  } else {
    fail(ErrorKind::config, "unknown ablation: " + which);
  }

  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("ablation", rep.name);
  meta.emplace_back("config_digest", sc.config_digest);
  meta.insert(meta.end(), rep.notes.begin(), rep.notes.end());
  write_report_csv(art.reports() + "/ablate_" + rep.name + ".csv", rep.rows);
  write_report_kv(art.reports() + "/ablate_" + rep.name + ".kv", rep.rows, meta);
  write_resolved(cfg, "ablate-" + rep.name);
}

std::string cmd_report_storage(const RunConfig& cfg) {
  validate(cfg);
  StorageReport rep = storage_report(
      static_cast<std::uint64_t>(cfg.storage_pool_size),
      static_cast<std::uint64_t>(cfg.storage_d_e),
      static_cast<std::uint64_t>(cfg.storage_bytes_per_scalar), cfg.storage_caption_tokens,
      static_cast<std::uint64_t>(cfg.storage_bytes_per_token));

  char pct[32];
  std::snprintf(pct, sizeof(pct), "%.0f", rep.relative_overhead * 100.0);
  std::string text;
  text += "pool_size=" + std::to_string(cfg.storage_pool_size) + "\n";
  text += "embedding_bytes_per_item=" + format_metric(rep.embedding_bytes_per_item) + "\n";
  text += "caption_bytes_per_item=" + format_metric(rep.caption_bytes_per_item) + "\n";
  text += "total_embedding_bytes=" + format_metric(rep.total_embedding_bytes) + "\n";
  text += "total_caption_bytes=" + format_metric(rep.total_caption_bytes) + "\n";
  text += "relative_overhead=" + format_metric(rep.relative_overhead) + " (≈ " + pct +
          "%)\n";

  Artifacts art(cfg.out_dir);
  std::filesystem::create_directories(art.reports());
  write_text_file(art.reports() + "/storage.txt", text);
  write_resolved(cfg, "report-storage");
  return text;
}

}  // namespace efsa
