#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace efsa {

struct ManifestRecord {
  std::string id;
  std::string domain;
  std::string caption;
};

struct RankedEntry {
  std::string id;
  float score;
};

// Descending score, ties broken by ascending id.
using RankedList = std::vector<RankedEntry>;

// f64 accumulation over f32 inputs, f32 result.
float cosine(std::span<const float> u, std::span<const float> v);

inline constexpr std::string_view kPoolMagic = "EFSAPOOL";
inline constexpr std::string_view kFeatureMagic = "EFSAFEAT";

// Row-major f32 matrix with a magic-tagged binary file form.
struct MatrixFile {
  std::int64_t dim = 0;
  std::int64_t count = 0;
  std::vector<float> data;

  std::span<const float> row(std::int64_t i) const {
    return {data.data() + i * dim, static_cast<std::size_t>(dim)};
  }
};

void write_matrix_file(const std::string& path, std::string_view magic, const MatrixFile& m);
MatrixFile read_matrix_file(const std::string& path, std::string_view magic);

// TSV rows id<TAB>domain<TAB>caption; backslash, tab and newline in captions
// are escaped so round trips are lossless.
void write_manifest(const std::string& path, std::span<const ManifestRecord> records);
std::vector<ManifestRecord> read_manifest(const std::string& path);

// Immutable store of cached unit-norm image embeddings plus their manifest.
class PoolStore {
 public:
  PoolStore() = default;

  // Rows are normalized on ingest; rows already unit-norm within 1e-5 are
  // kept bit-for-bit so cached encoder outputs survive round trips.
  static PoolStore build(std::vector<float> embeddings, std::int64_t dim,
                         std::vector<ManifestRecord> manifest);
  static PoolStore load(const std::string& store_path, const std::string& manifest_path);
  void save(const std::string& store_path, const std::string& manifest_path) const;

  std::int64_t count() const { return count_; }
  std::int64_t dim() const { return dim_; }
  std::span<const float> row(std::int64_t i) const {
    return {data_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  const ManifestRecord& record(std::int64_t i) const { return manifest_[i]; }
  const std::vector<ManifestRecord>& manifest() const { return manifest_; }
  std::int64_t row_of(std::string_view id) const;

  // Exact top-k by cosine via a chunked scan; chunk results merge
  // deterministically, so output is identical for any thread count.
  RankedList top_k(std::span<const float> query, std::int64_t k, int threads = 1) const;

  // Cached captions in the order requested; unknown id raises a lookup error.
  std::vector<std::string> captions_for(std::span<const std::string> ids) const;

  static PoolStore mix(std::span<const PoolStore* const> stores);

  std::vector<std::int64_t> rows_for_domain(std::string_view domain) const;
  PoolStore subset(std::span<const std::int64_t> rows) const;

 private:
  std::int64_t dim_ = 0;
  std::int64_t count_ = 0;
  std::vector<float> data_;
  std::vector<ManifestRecord> manifest_;
  std::unordered_map<std::string, std::int64_t> index_;

  void build_index();
};

struct StorageReport {
  double embedding_bytes_per_item = 0;
  double caption_bytes_per_item = 0;
  double total_embedding_bytes = 0;
  double total_caption_bytes = 0;
  double relative_overhead = 0;
};

StorageReport storage_report(std::uint64_t pool_size, std::uint64_t d_e,
                             std::uint64_t bytes_per_scalar, double avg_caption_tokens,
                             std::uint64_t bytes_per_token);

}  // namespace efsa
