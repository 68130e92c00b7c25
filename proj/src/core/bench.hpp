#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/pool.hpp"

namespace efsa {

// Domain label of background distractor rows.
inline constexpr std::string_view kOpenDomain = "open";

struct QueryRecord {
  std::string id;
  std::string domain;
  std::string gt_id;
  std::string text;
};

void write_queries(const std::string& path, std::span<const QueryRecord> queries);
std::vector<QueryRecord> read_queries(const std::string& path);

struct BenchConfig {
  std::int64_t d_in = 512;
  std::int64_t n_domains = 4;
  std::int64_t items_per_domain = 384;
  std::int64_t hard_group_size = 4;
  std::int64_t shared_attrs = 4;  // per group; each member adds one distinguishing attribute
  // 0 = exactly as many words as the hard groups need (disjoint per group).
  std::int64_t attr_vocab_size = 0;
  double noise_sigma = 0.05;
  std::int64_t n_queries_per_domain = 64;
  std::int64_t n_distractors = 20000;
  std::int64_t caption_noise_words = 0;   // caption-only words absent from features
  // Captions under-describe: each names this many of the group's shared
  // attributes (rotating by member, so all of them appear in some caption).
  std::int64_t caption_shared_mentions = 2;
  std::int64_t query_shared_mentions = 4; // shared attributes echoed in the query text
  std::uint64_t seed = 1;
  double domain_scale = 1.0;
  double attr_scale = 1.0;
  double distinct_scale = 1.5;
  double background_scale = 1.0;
};

// Ground-truth generative state for one pool row (empty for distractors).
struct ItemLatents {
  std::int32_t domain = -1;
  std::vector<std::int64_t> attrs;  // sorted global attribute ids
};

struct BenchData {
  std::vector<ManifestRecord> manifest;  // domain items first, then distractors
  MatrixFile features;                   // raw, aligned with manifest
  std::vector<QueryRecord> queries;
  std::vector<ItemLatents> latents;        // aligned with manifest
  std::vector<ItemLatents> query_latents;  // aligned with queries
  std::vector<std::string> domains;
  // Attribute embeddings by global id, exposed for oracle-side diagnostics.
  std::unordered_map<std::int64_t, std::vector<float>> attr_vectors;
};

BenchData generate(const BenchConfig& cfg);

// Ranks the pool by latent attribute overlap with the query's ground-truth
// item (domain match counts as one shared latent). Ties by ascending id.
RankedList oracle_rank(const BenchData& data, std::int64_t query_index);

}  // namespace efsa
