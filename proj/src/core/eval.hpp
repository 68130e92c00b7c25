#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "core/bench.hpp"
#include "core/episode.hpp"
#include "core/pool.hpp"

namespace efsa {

enum class Method { zero_shot, finetune, t2t, efsa };

std::string_view method_label(Method m);
Method method_from_name(std::string_view name);

struct RecallRow {
  std::string domain;  // domain name, or "average"
  std::string method;
  double r1 = 0;
  double r5 = 0;
  double r10 = 0;
};

// 1-based rank of id in the list, 0 when absent.
std::int64_t rank_of(const RankedList& ranking, std::string_view id);

// Fraction of ground-truth ranks that are positive and <= k.
double recall_at_k(std::span<const std::int64_t> gt_ranks, std::int64_t k);

struct EpisodeExportRecord {
  std::string query_id;
  std::string method;
  RankedList ranking;
};

struct SuiteConfig {
  EpisodeConfig episode;
  FinetuneConfig finetune;
  std::vector<Method> methods = {Method::zero_shot, Method::finetune, Method::t2t,
                                 Method::efsa};
  int threads = 1;
  bool collect_exports = false;
  std::int64_t export_depth = 10;
  std::string config_digest;
};

struct SuiteResult {
  std::vector<RecallRow> rows;  // method-major; per-domain rows then an average row
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<EpisodeExportRecord> exports;
  // Fraction of queries whose ground truth survived initial retrieval; the
  // exact ceiling for any adapted recall at depth <= episode k.
  double gt_in_candidates = 0.0;
  std::int64_t aborted_episodes = 0;
};

// Evaluates the requested methods over one pool and one query set. Episodes
// run in parallel; results are identical for any thread count.
SuiteResult run_suite(const PoolStore& pool, const MatrixFile* features,
                      const EncoderParams& vision, const EncoderParams& text,
                      std::span<const QueryRecord> queries, const SuiteConfig& cfg);

struct AblationReport {
  std::string name;
  std::vector<RecallRow> rows;  // method column carries the swept setting
  std::vector<std::pair<std::string, std::string>> notes;
};

AblationReport ablate_topk(const PoolStore& pool, const MatrixFile* features,
                           const EncoderParams& vision, const EncoderParams& text,
                           std::span<const QueryRecord> queries, const SuiteConfig& base,
                           std::span<const std::int64_t> ks);

AblationReport ablate_epochs(const PoolStore& pool, const MatrixFile* features,
                             const EncoderParams& vision, const EncoderParams& text,
                             std::span<const QueryRecord> queries, const SuiteConfig& base,
                             std::span<const std::int64_t> epoch_counts);

// Variants: combined, contrastive-only (beta = 0), hinge-only (alpha = 0).
AblationReport ablate_loss(const PoolStore& pool, const MatrixFile* features,
                           const EncoderParams& vision, const EncoderParams& text,
                           std::span<const QueryRecord> queries, const SuiteConfig& base);

AblationReport ablate_lora_vs_full(const PoolStore& pool, const MatrixFile* features,
                                   const EncoderParams& vision, const EncoderParams& text,
                                   std::span<const QueryRecord> queries,
                                   const SuiteConfig& base);

// CSV: header domain,method,r1,r5,r10; values with 4 decimals.
void write_report_csv(const std::string& path, std::span<const RecallRow> rows);
std::string report_csv_string(std::span<const RecallRow> rows);

// Line-delimited key=value mirror of the CSV plus metadata.
void write_report_kv(const std::string& path, std::span<const RecallRow> rows,
                     std::span<const std::pair<std::string, std::string>> metadata);

// One line per episode: query id, method, ranked ids, scores.
void write_episode_exports(const std::string& path,
                           std::span<const EpisodeExportRecord> records);

}  // namespace efsa
