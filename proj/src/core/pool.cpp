#include "core/pool.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>

#include "core/common.hpp"
#include "core/tensor.hpp"

namespace efsa {

float cosine(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) fail(ErrorKind::shape, "cosine: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    s += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return static_cast<float>(s);
}

void write_matrix_file(const std::string& path, std::string_view magic, const MatrixFile& m) {
  if (m.count * m.dim != static_cast<std::int64_t>(m.data.size()))
    fail(ErrorKind::shape, "write_matrix_file: data size does not match count x dim");
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "write_matrix_file: cannot open " + path);
  f.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  std::uint32_t version = 1;
  std::uint32_t dim = static_cast<std::uint32_t>(m.dim);
  std::uint64_t count = static_cast<std::uint64_t>(m.count);
  f.write(reinterpret_cast<const char*>(&version), 4);
  f.write(reinterpret_cast<const char*>(&dim), 4);
  f.write(reinterpret_cast<const char*>(&count), 8);
  f.write(reinterpret_cast<const char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * 4));
  if (!f) fail(ErrorKind::io, "write_matrix_file: write failed for " + path);
}

MatrixFile read_matrix_file(const std::string& path, std::string_view magic) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::missing_artifact, "read_matrix_file: cannot open " + path);
  std::string got(magic.size(), '\0');
  f.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!f || got != magic) fail(ErrorKind::ingest, "read_matrix_file: bad magic in " + path);
  std::uint32_t version = 0, dim = 0;
  std::uint64_t count = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  f.read(reinterpret_cast<char*>(&dim), 4);
  f.read(reinterpret_cast<char*>(&count), 8);
  if (!f || version != 1)
    fail(ErrorKind::ingest, "read_matrix_file: unsupported header in " + path);
  if (dim == 0 && count > 0) fail(ErrorKind::ingest, "read_matrix_file: zero dim in " + path);
  MatrixFile m;
  m.dim = dim;
  m.count = static_cast<std::int64_t>(count);
  m.data.resize(static_cast<std::size_t>(m.dim * m.count));
  f.read(reinterpret_cast<char*>(m.data.data()),
         static_cast<std::streamsize>(m.data.size() * 4));
  if (!f) fail(ErrorKind::ingest, "read_matrix_file: truncated file " + path);
  return m;
}

namespace {

void check_field(std::string_view v, const char* field) {
  for (char c : v) {
    if (c == '\t' || c == '\n' || c == '\r' || c == '\\')
      fail(ErrorKind::ingest,
           std::string("manifest: ") + field + " contains a reserved character");
  }
}

std::string escape_caption(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_caption(std::string_view s, const std::string& path) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (i + 1 >= s.size()) fail(ErrorKind::ingest, "manifest: dangling escape in " + path);
    ++i;
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      default: fail(ErrorKind::ingest, "manifest: unknown escape in " + path);
    }
  }
  return out;
}

}  // namespace

void write_manifest(const std::string& path, std::span<const ManifestRecord> records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "write_manifest: cannot open " + path);
  for (const auto& r : records) {
    check_field(r.id, "id");
    check_field(r.domain, "domain");
    f << r.id << '\t' << r.domain << '\t' << escape_caption(r.caption) << '\n';
  }
  if (!f) fail(ErrorKind::io, "write_manifest: write failed for " + path);
}

std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::missing_artifact, "read_manifest: cannot open " + path);
  std::vector<ManifestRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      fail(ErrorKind::ingest,
           "read_manifest: malformed line " + std::to_string(line_no) + " in " + path);
    ManifestRecord r;
    r.id = line.substr(0, t1);
    r.domain = line.substr(t1 + 1, t2 - t1 - 1);
    r.caption = unescape_caption(std::string_view(line).substr(t2 + 1), path);
    out.push_back(std::move(r));
  }
  return out;
}

void PoolStore::build_index() {
  index_.clear();
  index_.reserve(static_cast<std::size_t>(count_));
  for (std::int64_t i = 0; i < count_; ++i) {
    auto [it, inserted] = index_.emplace(manifest_[i].id, i);
    if (!inserted) fail(ErrorKind::ingest, "pool: duplicate id " + manifest_[i].id);
  }
}

PoolStore PoolStore::build(std::vector<float> embeddings, std::int64_t dim,
                           std::vector<ManifestRecord> manifest) {
  if (dim <= 0 && !manifest.empty()) fail(ErrorKind::shape, "pool build: dim must be positive");
  if (static_cast<std::int64_t>(embeddings.size()) !=
      dim * static_cast<std::int64_t>(manifest.size()))
    fail(ErrorKind::shape, "pool build: embedding count does not match manifest");

  PoolStore p;
  p.dim_ = dim;
  p.count_ = static_cast<std::int64_t>(manifest.size());
  p.data_ = std::move(embeddings);
  p.manifest_ = std::move(manifest);
  for (std::int64_t i = 0; i < p.count_; ++i) {
    float* row = p.data_.data() + i * dim;
    double ss = 0.0;
    for (std::int64_t j = 0; j < dim; ++j)
      ss += static_cast<double>(row[j]) * static_cast<double>(row[j]);
    double norm = std::sqrt(ss);
    if (!(norm > kNormEpsilon))
      fail(ErrorKind::ingest,
           "pool build: row " + std::to_string(i) + " (" + p.manifest_[i].id +
               ") has near-zero norm");
    if (std::fabs(norm - 1.0) <= 1e-5) continue;  // already normalized; keep bits
    for (std::int64_t j = 0; j < dim; ++j)
      row[j] = static_cast<float>(static_cast<double>(row[j]) / norm);
  }
  p.build_index();
  return p;
}

PoolStore PoolStore::load(const std::string& store_path, const std::string& manifest_path) {
  MatrixFile m = read_matrix_file(store_path, kPoolMagic);
  auto manifest = read_manifest(manifest_path);
  if (static_cast<std::int64_t>(manifest.size()) != m.count)
    fail(ErrorKind::ingest, "pool load: manifest has " + std::to_string(manifest.size()) +
                                " records but store has " + std::to_string(m.count) + " rows");
  PoolStore p;
  p.dim_ = m.dim;
  p.count_ = m.count;
  p.data_ = std::move(m.data);
  p.manifest_ = std::move(manifest);
  for (std::int64_t i = 0; i < p.count_; ++i) {
    auto r = p.row(i);
    double ss = 0.0;
    for (float v : r) ss += static_cast<double>(v) * static_cast<double>(v);
    if (std::fabs(std::sqrt(ss) - 1.0) > 1e-5)
      fail(ErrorKind::ingest,
           "pool load: row " + std::to_string(i) + " is not unit-norm in " + store_path);
  }
  p.build_index();
  return p;
}

void PoolStore::save(const std::string& store_path, const std::string& manifest_path) const {
  MatrixFile m;
  m.dim = dim_;
  m.count = count_;
  m.data = data_;
  write_matrix_file(store_path, kPoolMagic, m);
  write_manifest(manifest_path, manifest_);
}

std::int64_t PoolStore::row_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? -1 : it->second;
}

RankedList PoolStore::top_k(std::span<const float> query, std::int64_t k, int threads) const {
  if (count_ == 0) fail(ErrorKind::contract, "top_k: empty store");
  if (k < 1) fail(ErrorKind::contract, "top_k: k must be at least 1");
  if (static_cast<std::int64_t>(query.size()) != dim_)
    fail(ErrorKind::shape, "top_k: query dimension mismatch");
  k = std::min(k, count_);

  auto better = [this](std::int64_t a, float sa, std::int64_t b, float sb) {
    if (sa != sb) return sa > sb;
    return manifest_[a].id < manifest_[b].id;
  };

  constexpr std::int64_t kChunk = 8192;
  std::int64_t n_chunks = (count_ + kChunk - 1) / kChunk;
  std::vector<std::vector<std::pair<std::int64_t, float>>> chunk_best(
      static_cast<std::size_t>(n_chunks));

  parallel_for(count_, threads, kChunk, [&](std::int64_t lo, std::int64_t hi) {
    auto& best = chunk_best[static_cast<std::size_t>(lo / kChunk)];
    best.reserve(static_cast<std::size_t>(std::min(k, hi - lo)));
    for (std::int64_t i = lo; i < hi; ++i) {
      float s = cosine(query, row(i));
      if (static_cast<std::int64_t>(best.size()) < k) {
        best.emplace_back(i, s);
        std::push_heap(best.begin(), best.end(), [&](const auto& x, const auto& y) {
          return better(x.first, x.second, y.first, y.second);
        });
        continue;
      }
      const auto& worst = best.front();
      if (better(i, s, worst.first, worst.second)) {
        std::pop_heap(best.begin(), best.end(), [&](const auto& x, const auto& y) {
          return better(x.first, x.second, y.first, y.second);
        });
        best.back() = {i, s};
        std::push_heap(best.begin(), best.end(), [&](const auto& x, const auto& y) {
          return better(x.first, x.second, y.first, y.second);
        });
      }
    }
  });

  std::vector<std::pair<std::int64_t, float>> merged;
  merged.reserve(static_cast<std::size_t>(k * n_chunks));
  for (auto& cb : chunk_best) merged.insert(merged.end(), cb.begin(), cb.end());
  std::sort(merged.begin(), merged.end(), [&](const auto& x, const auto& y) {
    return better(x.first, x.second, y.first, y.second);
  });
  if (static_cast<std::int64_t>(merged.size()) > k) merged.resize(static_cast<std::size_t>(k));

  RankedList out;
  out.reserve(merged.size());
  for (const auto& [idx, score] : merged) out.push_back({manifest_[idx].id, score});
  return out;
}

std::vector<std::string> PoolStore::captions_for(std::span<const std::string> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    std::int64_t r = row_of(id);
    if (r < 0) fail(ErrorKind::lookup, "captions_for: unknown id " + id);
    out.push_back(manifest_[r].caption);
  }
  return out;
}

PoolStore PoolStore::mix(std::span<const PoolStore* const> stores) {
  if (stores.empty()) fail(ErrorKind::contract, "mix: no stores given");
  std::int64_t dim = stores.front()->dim_;
  for (const auto* s : stores) {
    if (s->dim_ != dim) fail(ErrorKind::shape, "mix: stores disagree on embedding dimension");
  }
  PoolStore out;
  out.dim_ = dim;
  for (const auto* s : stores) {
    out.data_.insert(out.data_.end(), s->data_.begin(), s->data_.end());
    out.manifest_.insert(out.manifest_.end(), s->manifest_.begin(), s->manifest_.end());
  }
  out.count_ = static_cast<std::int64_t>(out.manifest_.size());
  out.build_index();
  return out;
}

std::vector<std::int64_t> PoolStore::rows_for_domain(std::string_view domain) const {
  std::vector<std::int64_t> out;
  for (std::int64_t i = 0; i < count_; ++i) {
    if (manifest_[i].domain == domain) out.push_back(i);
  }
  return out;
}

PoolStore PoolStore::subset(std::span<const std::int64_t> rows) const {
  PoolStore out;
  out.dim_ = dim_;
  out.count_ = static_cast<std::int64_t>(rows.size());
  out.data_.reserve(rows.size() * static_cast<std::size_t>(dim_));
  out.manifest_.reserve(rows.size());
  for (std::int64_t r : rows) {
    if (r < 0 || r >= count_) fail(ErrorKind::contract, "subset: row out of range");
    auto src = row(r);
    out.data_.insert(out.data_.end(), src.begin(), src.end());
    out.manifest_.push_back(manifest_[r]);
  }
  out.build_index();
  return out;
}

StorageReport storage_report(std::uint64_t pool_size, std::uint64_t d_e,
                             std::uint64_t bytes_per_scalar, double avg_caption_tokens,
                             std::uint64_t bytes_per_token) {
  if (d_e == 0 || bytes_per_scalar == 0)
    fail(ErrorKind::config, "storage_report: embedding geometry must be positive");
  if (!(avg_caption_tokens >= 0.0))
    fail(ErrorKind::config, "storage_report: token count must be non-negative");
  StorageReport r;
  r.embedding_bytes_per_item = static_cast<double>(d_e) * static_cast<double>(bytes_per_scalar);
  r.caption_bytes_per_item = avg_caption_tokens * static_cast<double>(bytes_per_token);
  r.total_embedding_bytes = r.embedding_bytes_per_item * static_cast<double>(pool_size);
  r.total_caption_bytes = r.caption_bytes_per_item * static_cast<double>(pool_size);
  r.relative_overhead = r.caption_bytes_per_item / r.embedding_bytes_per_item;
  return r;
}

}  // namespace efsa
