#include "core/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "core/common.hpp"

namespace efsa {

namespace {

std::string format4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

struct DomainTally {
  std::int64_t n = 0;
  std::int64_t hits1 = 0;
  std::int64_t hits5 = 0;
  std::int64_t hits10 = 0;
};

std::vector<RecallRow> tally_rows(std::span<const QueryRecord> queries,
                                  std::span<const std::string> domain_order,
                                  std::span<const Method> methods,
                                  const std::vector<std::vector<std::int64_t>>& ranks) {
  std::vector<RecallRow> rows;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    std::unordered_map<std::string, DomainTally> tally;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      DomainTally& t = tally[queries[qi].domain];
      std::int64_t r = ranks[mi][qi];
      ++t.n;
      if (r > 0 && r <= 1) ++t.hits1;
      if (r > 0 && r <= 5) ++t.hits5;
      if (r > 0 && r <= 10) ++t.hits10;
    }
    double s1 = 0, s5 = 0, s10 = 0;
    for (const auto& dom : domain_order) {
      const DomainTally& t = tally[dom];
      RecallRow row;
      row.domain = dom;
      row.method = std::string(method_label(methods[mi]));
      row.r1 = static_cast<double>(t.hits1) / static_cast<double>(t.n);
      row.r5 = static_cast<double>(t.hits5) / static_cast<double>(t.n);
      row.r10 = static_cast<double>(t.hits10) / static_cast<double>(t.n);
      s1 += row.r1;
      s5 += row.r5;
      s10 += row.r10;
      rows.push_back(std::move(row));
    }
    RecallRow avg;
    avg.domain = "average";
    avg.method = std::string(method_label(methods[mi]));
    double nd = static_cast<double>(domain_order.size());
    avg.r1 = s1 / nd;
    avg.r5 = s5 / nd;
    avg.r10 = s10 / nd;
    rows.push_back(std::move(avg));
  }
  return rows;
}

double average_r1(const AblationReport& rep, const std::string& method) {
  for (const auto& row : rep.rows)
    if (row.domain == "average" && row.method == method) return row.r1;
  fail(ErrorKind::contract, "ablation report lacks an average row for " + method);
}

void append_decorated(AblationReport& rep, const SuiteResult& res,
                      const std::string& setting) {
  for (RecallRow row : res.rows) {
    row.method += "[" + setting + "]";
    rep.rows.push_back(std::move(row));
  }
}

}  // namespace

std::string_view method_label(Method m) {
  switch (m) {
    case Method::zero_shot: return "ZS";
    case Method::finetune: return "FT";
    case Method::t2t: return "T2T";
    case Method::efsa: return "EFSA";
  }
  fail(ErrorKind::contract, "unknown method");
}

Method method_from_name(std::string_view name) {
  if (name == "ZS" || name == "zs" || name == "zero-shot") return Method::zero_shot;
  if (name == "FT" || name == "ft" || name == "finetune") return Method::finetune;
  if (name == "T2T" || name == "t2t") return Method::t2t;
  if (name == "EFSA" || name == "efsa") return Method::efsa;
  fail(ErrorKind::config, "unknown method name: " + std::string(name));
}

std::int64_t rank_of(const RankedList& ranking, std::string_view id) {
  for (std::size_t i = 0; i < ranking.size(); ++i)
    if (ranking[i].id == id) return static_cast<std::int64_t>(i) + 1;
  return 0;
}

double recall_at_k(std::span<const std::int64_t> gt_ranks, std::int64_t k) {
  if (k < 1) fail(ErrorKind::contract, "recall_at_k: k must be positive");
  if (gt_ranks.empty()) fail(ErrorKind::contract, "recall_at_k: no ranks given");
  std::int64_t hits = 0;
  for (auto r : gt_ranks)
    if (r > 0 && r <= k) ++hits;
  return static_cast<double>(hits) / static_cast<double>(gt_ranks.size());
}

SuiteResult run_suite(const PoolStore& pool, const MatrixFile* features,
                      const EncoderParams& vision, const EncoderParams& text,
                      std::span<const QueryRecord> queries, const SuiteConfig& cfg) {
  if (queries.empty()) fail(ErrorKind::contract, "run_suite: no queries");
  if (cfg.methods.empty()) fail(ErrorKind::config, "run_suite: no methods requested");
  if (pool.count() == 0) fail(ErrorKind::contract, "run_suite: empty pool");
  for (const auto& q : queries)
    if (pool.row_of(q.gt_id) < 0)
      fail(ErrorKind::lookup, "run_suite: ground truth id not in pool: " + q.gt_id);

  bool want_zs = false, want_ft = false, want_t2t = false, want_efsa = false;
  for (Method m : cfg.methods) {
    if (m == Method::zero_shot) want_zs = true;
    if (m == Method::finetune) want_ft = true;
    if (m == Method::t2t) want_t2t = true;
    if (m == Method::efsa) want_efsa = true;
  }

  std::vector<std::string> domain_order;
  for (const auto& q : queries)
    if (std::find(domain_order.begin(), domain_order.end(), q.domain) == domain_order.end())
      domain_order.push_back(q.domain);

  std::int64_t n = static_cast<std::int64_t>(queries.size());
  std::int64_t d_in = text.d_in();

  // The fine-tuning baseline is one training job, then a frozen model that
  // gets its own re-encoded pool.
  FinetunedModel ft;
  PoolStore ft_pool;
  if (want_ft) {
    if (features == nullptr)
      fail(ErrorKind::contract, "run_suite: finetune baseline needs raw pool features");
    ft = finetune_baseline(pool, *features, vision, text, cfg.finetune);
    std::vector<float> re_encoded = encode_batch(vision, features->data.data(),
                                                 features->count, &ft.vision_adapters,
                                                 cfg.threads);
    ft_pool = PoolStore::build(std::move(re_encoded), vision.d_e(), pool.manifest());
  }

  CaptionIndex caption_index;
  if (want_t2t) caption_index = build_caption_index(pool, text, cfg.threads);

  std::vector<std::vector<std::int64_t>> ranks(cfg.methods.size(),
                                               std::vector<std::int64_t>(queries.size(), 0));
  std::vector<char> gt_in_top(queries.size(), 0);
  std::vector<char> aborted(queries.size(), 0);
  std::vector<EpisodeExportRecord> exports(cfg.collect_exports && want_efsa ? queries.size()
                                                                            : 0);

  auto slot = [&](Method m) {
    for (std::size_t i = 0; i < cfg.methods.size(); ++i)
      if (cfg.methods[i] == m) return static_cast<std::int64_t>(i);
    return static_cast<std::int64_t>(-1);
  };
  std::int64_t zs_slot = slot(Method::zero_shot);
  std::int64_t ft_slot = slot(Method::finetune);
  std::int64_t t2t_slot = slot(Method::t2t);
  std::int64_t efsa_slot = slot(Method::efsa);

  parallel_for(n, cfg.threads, 1, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      const QueryRecord& q = queries[static_cast<std::size_t>(i)];
      std::size_t qi = static_cast<std::size_t>(i);

      if (want_efsa) {
        QueryInput qin;
        qin.id = q.id;
        qin.text = q.text;
        EpisodeResult er = run_episode(pool, features, qin, cfg.episode, vision, text);
        std::int64_t pre = rank_of(er.pre_ranking, q.gt_id);
        if (zs_slot >= 0) ranks[static_cast<std::size_t>(zs_slot)][qi] = pre;
        ranks[static_cast<std::size_t>(efsa_slot)][qi] = rank_of(er.post_ranking, q.gt_id);
        gt_in_top[qi] = (pre > 0 && pre <= cfg.episode.k) ? 1 : 0;
        aborted[qi] = er.aborted ? 1 : 0;
        if (!exports.empty()) {
          EpisodeExportRecord rec;
          rec.query_id = q.id;
          rec.method = std::string(method_label(Method::efsa));
          std::int64_t depth = std::min<std::int64_t>(
              cfg.export_depth, static_cast<std::int64_t>(er.post_ranking.size()));
          rec.ranking.assign(er.post_ranking.begin(), er.post_ranking.begin() + depth);
          exports[qi] = std::move(rec);
        }
      } else if (want_zs) {
        Embedding e = embed_query(text, {q.id, q.text, {}, false});
        RankedList top = pool.top_k(e, std::min<std::int64_t>(10, pool.count()), 1);
        ranks[static_cast<std::size_t>(zs_slot)][qi] = rank_of(top, q.gt_id);
      }

      if (want_ft) {
        FeatureVector fv = featurize_text(q.text, d_in);
        Embedding e = encode(text, fv, &ft.text_adapters);
        RankedList top = ft_pool.top_k(e, std::min<std::int64_t>(10, ft_pool.count()), 1);
        ranks[static_cast<std::size_t>(ft_slot)][qi] = rank_of(top, q.gt_id);
      }

      if (want_t2t) {
        RankedList full = t2t_rank(pool, caption_index, text, q.text);
        ranks[static_cast<std::size_t>(t2t_slot)][qi] = rank_of(full, q.gt_id);
      }
    }
  });

  SuiteResult out;
  out.rows = tally_rows(queries, domain_order, cfg.methods, ranks);
  out.exports = std::move(exports);
  if (want_efsa) {
    std::int64_t in_top = 0;
    for (char c : gt_in_top) in_top += c;
    for (char c : aborted) out.aborted_episodes += c;
    out.gt_in_candidates = static_cast<double>(in_top) / static_cast<double>(n);
  }

  std::string method_names;
  for (Method m : cfg.methods) {
    if (!method_names.empty()) method_names += "+";
    method_names += std::string(method_label(m));
  }
  out.metadata = {
      {"pool_size", std::to_string(pool.count())},
      {"embedding_dim", std::to_string(pool.dim())},
      {"queries", std::to_string(queries.size())},
      {"domains", std::to_string(domain_order.size())},
      {"methods", method_names},
      {"episode_k", std::to_string(cfg.episode.k)},
      {"episode_epochs", std::to_string(cfg.episode.epochs)},
      {"tau", format4(cfg.episode.loss.tau)},
      {"margin", format4(cfg.episode.loss.margin)},
      {"alpha", format4(cfg.episode.loss.alpha)},
      {"beta", format4(cfg.episode.loss.beta)},
      {"lora_rank", std::to_string(cfg.episode.lora.rank)},
      {"lora_scale", format4(cfg.episode.lora.scale)},
      {"episode_lr", std::to_string(cfg.episode.opt.lr)},
      {"adapt", cfg.episode.adapt == AdaptMode::lora ? "lora" : "full"},
      {"seed", std::to_string(cfg.episode.seed)},
  };
  if (want_ft) {
    out.metadata.emplace_back("ft_epochs", std::to_string(cfg.finetune.epochs));
    out.metadata.emplace_back("ft_batch", std::to_string(cfg.finetune.batch));
  }
  if (want_efsa) {
    out.metadata.emplace_back("gt_in_candidates", format4(out.gt_in_candidates));
    out.metadata.emplace_back("aborted_episodes", std::to_string(out.aborted_episodes));
  }
  if (!cfg.config_digest.empty())
    out.metadata.emplace_back("config_digest", cfg.config_digest);
  return out;
}

AblationReport ablate_topk(const PoolStore& pool, const MatrixFile* features,
                           const EncoderParams& vision, const EncoderParams& text,
                           std::span<const QueryRecord> queries, const SuiteConfig& base,
                           std::span<const std::int64_t> ks) {
  if (ks.empty()) fail(ErrorKind::config, "ablate_topk: no k values");
  AblationReport rep;
  rep.name = "topk";
  std::vector<double> avg1, avg10;
  for (std::int64_t k : ks) {
    SuiteConfig sc = base;
    sc.methods = {Method::efsa};
    sc.collect_exports = false;
    sc.episode.k = k;
    SuiteResult res = run_suite(pool, features, vision, text, queries, sc);
    std::string setting = "k=" + std::to_string(k);
    append_decorated(rep, res, setting);
    double r1 = 0, r10 = 0;
    for (const auto& row : res.rows)
      if (row.domain == "average") {
        r1 = row.r1;
        r10 = row.r10;
      }
    avg1.push_back(r1);
    avg10.push_back(r10);
    rep.notes.emplace_back("gt_in_candidates[" + setting + "]",
                           format4(res.gt_in_candidates));
    rep.notes.emplace_back("containment_ok[" + setting + "]",
                           r10 <= res.gt_in_candidates + 1e-12 ? "true" : "false");
  }
  bool nondec = true;
  for (std::size_t i = 1; i < avg10.size(); ++i)
    if (avg10[i] < avg10[i - 1] - 1e-12) nondec = false;
  rep.notes.emplace_back("r10_nondecreasing", nondec ? "true" : "false");
  if (avg1.size() >= 2) {
    double last_step = std::fabs(avg1.back() - avg1[avg1.size() - 2]);
    rep.notes.emplace_back("r1_plateau", last_step <= 0.02 ? "true" : "false");
  }
  return rep;
}

AblationReport ablate_epochs(const PoolStore& pool, const MatrixFile* features,
                             const EncoderParams& vision, const EncoderParams& text,
                             std::span<const QueryRecord> queries, const SuiteConfig& base,
                             std::span<const std::int64_t> epoch_counts) {
  if (epoch_counts.empty()) fail(ErrorKind::config, "ablate_epochs: no epoch counts");
  AblationReport rep;
  rep.name = "epochs";
  std::vector<double> avg1, avg5, avg10;
  for (std::int64_t e : epoch_counts) {
    SuiteConfig sc = base;
    sc.methods = {Method::efsa};
    sc.collect_exports = false;
    sc.episode.epochs = e;
    SuiteResult res = run_suite(pool, features, vision, text, queries, sc);
    append_decorated(rep, res, "epochs=" + std::to_string(e));
    for (const auto& row : res.rows)
      if (row.domain == "average") {
        avg1.push_back(row.r1);
        avg5.push_back(row.r5);
        avg10.push_back(row.r10);
      }
  }
  auto argmax_setting = [&](const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] > v[best]) best = i;
    return std::to_string(epoch_counts[best]);
  };
  rep.notes.emplace_back("argmax_r1_epochs", argmax_setting(avg1));
  rep.notes.emplace_back("argmax_r5_epochs", argmax_setting(avg5));
  rep.notes.emplace_back("argmax_r10_epochs", argmax_setting(avg10));
  return rep;
}

AblationReport ablate_loss(const PoolStore& pool, const MatrixFile* features,
                           const EncoderParams& vision, const EncoderParams& text,
                           std::span<const QueryRecord> queries, const SuiteConfig& base) {
  AblationReport rep;
  rep.name = "loss";
  struct Variant {
    const char* name;
    double alpha_mul;
    double beta_mul;
  };
  const Variant variants[] = {{"combined", 1, 1}, {"contrastive", 1, 0}, {"hinge", 0, 1}};
  for (const Variant& v : variants) {
    SuiteConfig sc = base;
    sc.methods = {Method::efsa};
    sc.collect_exports = false;
    sc.episode.loss.alpha = base.episode.loss.alpha * v.alpha_mul;
    sc.episode.loss.beta = base.episode.loss.beta * v.beta_mul;
    SuiteResult res = run_suite(pool, features, vision, text, queries, sc);
    append_decorated(rep, res, std::string("loss=") + v.name);
  }
  double combined = average_r1(rep, "EFSA[loss=combined]");
  double contrastive = average_r1(rep, "EFSA[loss=contrastive]");
  double hinge = average_r1(rep, "EFSA[loss=hinge]");
  rep.notes.emplace_back("combined_r1", format4(combined));
  rep.notes.emplace_back("contrastive_r1", format4(contrastive));
  rep.notes.emplace_back("hinge_r1", format4(hinge));
  rep.notes.emplace_back("combined_within_tolerance",
                         combined >= std::max(contrastive, hinge) - 0.01 ? "true" : "false");
  return rep;
}

AblationReport ablate_lora_vs_full(const PoolStore& pool, const MatrixFile* features,
                                   const EncoderParams& vision, const EncoderParams& text,
                                   std::span<const QueryRecord> queries,
                                   const SuiteConfig& base) {
  AblationReport rep;
  rep.name = "lora";
  for (AdaptMode mode : {AdaptMode::lora, AdaptMode::full}) {
    SuiteConfig sc = base;
    sc.methods = {Method::efsa};
    sc.collect_exports = false;
    sc.episode.adapt = mode;
    SuiteResult res = run_suite(pool, features, vision, text, queries, sc);
    append_decorated(rep, res,
                     std::string("adapt=") + (mode == AdaptMode::lora ? "lora" : "full"));
  }
  double lora_r1 = average_r1(rep, "EFSA[adapt=lora]");
  double full_r1 = average_r1(rep, "EFSA[adapt=full]");
  rep.notes.emplace_back("lora_r1", format4(lora_r1));
  rep.notes.emplace_back("full_r1", format4(full_r1));
  rep.notes.emplace_back("lora_at_least_full", lora_r1 >= full_r1 ? "true" : "false");
  return rep;
}

std::string report_csv_string(std::span<const RecallRow> rows) {
  std::string out = "domain,method,r1,r5,r10\n";
  for (const auto& row : rows) {
    out += row.domain;
    out += ',';
    out += row.method;
    out += ',';
    out += format4(row.r1);
    out += ',';
    out += format4(row.r5);
    out += ',';
    out += format4(row.r10);
    out += '\n';
  }
  return out;
}

void write_report_csv(const std::string& path, std::span<const RecallRow> rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "write_report_csv: cannot open " + path);
  f << report_csv_string(rows);
  if (!f) fail(ErrorKind::io, "write_report_csv: write failed for " + path);
}

void write_report_kv(const std::string& path, std::span<const RecallRow> rows,
                     std::span<const std::pair<std::string, std::string>> metadata) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "write_report_kv: cannot open " + path);
  for (const auto& [k, v] : metadata) f << "meta." << k << '=' << v << '\n';
  for (const auto& row : rows) {
    std::string prefix = "recall." + row.domain + "." + row.method;
    f << prefix << ".r1=" << format4(row.r1) << '\n';
    f << prefix << ".r5=" << format4(row.r5) << '\n';
    f << prefix << ".r10=" << format4(row.r10) << '\n';
  }
  if (!f) fail(ErrorKind::io, "write_report_kv: write failed for " + path);
}

void write_episode_exports(const std::string& path,
                           std::span<const EpisodeExportRecord> records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "write_episode_exports: cannot open " + path);
  char buf[32];
  for (const auto& rec : records) {
    f << rec.query_id << '\t' << rec.method << '\t';
    for (std::size_t i = 0; i < rec.ranking.size(); ++i) {
      if (i) f << ',';
      f << rec.ranking[i].id;
    }
    f << '\t';
    for (std::size_t i = 0; i < rec.ranking.size(); ++i) {
      if (i) f << ',';
      std::snprintf(buf, sizeof(buf), "%.6f", static_cast<double>(rec.ranking[i].score));
      f << buf;
    }
    f << '\n';
  }
  if (!f) fail(ErrorKind::io, "write_episode_exports: write failed for " + path);
}

}  // namespace efsa
