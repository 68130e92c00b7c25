#include "core/bench.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string_view>
#include <unordered_set>

#include "core/common.hpp"

namespace efsa {

namespace {

std::string escape_text(std::string_view s) {
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

std::string unescape_text(std::string_view s, const std::string& path) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (i + 1 >= s.size()) fail(ErrorKind::ingest, "queries: dangling escape in " + path);
    ++i;
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      default: fail(ErrorKind::ingest, "queries: unknown escape in " + path);
    }
  }
  return out;
}

// Pronounceable unique pseudo-words keep generated captions readable and give
// the hashing featurizer realistic token diversity.
class WordMint {
 public:
  explicit WordMint(Rng& rng) : rng_(rng) {}

  std::string next() {
    static const char* kOnsets[] = {"b", "br", "c", "cr", "d", "dr", "f", "fl", "g", "gl",
                                    "h", "j",  "k", "kr", "l", "m",  "n", "p",  "pl", "r",
                                    "s", "st", "t", "tr", "v", "z"};
    static const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ea", "ou"};
    static const char* kCodas[] = {"", "n", "r", "l", "s", "x", "m", "k"};
    for (int attempt = 0; attempt < 64; ++attempt) {
      std::string w;
      int syllables = 2 + static_cast<int>(rng_.uniform_index(2));
      for (int s = 0; s < syllables; ++s) {
        w += kOnsets[rng_.uniform_index(std::size(kOnsets))];
        w += kVowels[rng_.uniform_index(std::size(kVowels))];
      }
      w += kCodas[rng_.uniform_index(std::size(kCodas))];
      if (used_.insert(w).second) return w;
    }
    std::string w = "w" + std::to_string(counter_++);
    used_.insert(w);
    return w;
  }

 private:
  Rng& rng_;
  std::unordered_set<std::string> used_;
  std::uint64_t counter_ = 0;
};

std::vector<float> random_direction(Rng& rng, std::int64_t d, double scale) {
  std::vector<float> v(static_cast<std::size_t>(d));
  double s = scale / std::sqrt(static_cast<double>(d));
  for (auto& x : v) x = static_cast<float>(rng.gaussian() * s);
  return v;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

void validate(const BenchConfig& cfg) {
  if (cfg.d_in <= 0) fail(ErrorKind::config, "bench: d_in must be positive");
  if (cfg.n_domains < 1) fail(ErrorKind::config, "bench: need at least one domain");
  if (cfg.items_per_domain < 1) fail(ErrorKind::config, "bench: items_per_domain must be positive");
  if (cfg.hard_group_size < 2)
    fail(ErrorKind::config, "bench: hard groups need at least two members");
  if (cfg.items_per_domain % cfg.hard_group_size != 0)
    fail(ErrorKind::config, "bench: items_per_domain must be a multiple of hard_group_size");
  if (cfg.shared_attrs < 0) fail(ErrorKind::config, "bench: shared_attrs must be non-negative");
  if (!(cfg.noise_sigma >= 0.0)) fail(ErrorKind::config, "bench: noise_sigma must be non-negative");
  if (cfg.n_queries_per_domain < 0 || cfg.n_queries_per_domain > cfg.items_per_domain)
    fail(ErrorKind::config, "bench: queries per domain must be in [0, items_per_domain]");
  if (cfg.n_distractors < 0) fail(ErrorKind::config, "bench: n_distractors must be non-negative");
  if (cfg.caption_noise_words < 0 || cfg.caption_shared_mentions < 0 ||
      cfg.query_shared_mentions < 0)
    fail(ErrorKind::config, "bench: word counts must be non-negative");
  std::int64_t groups = cfg.items_per_domain / cfg.hard_group_size;
  std::int64_t required = groups * (cfg.shared_attrs + cfg.hard_group_size);
  if (cfg.attr_vocab_size != 0 && cfg.attr_vocab_size < required)
    fail(ErrorKind::config, "bench: attr_vocab_size " + std::to_string(cfg.attr_vocab_size) +
                                " is less than the " + std::to_string(required) +
                                " words the hard groups need");
}

}  // namespace

void write_queries(const std::string& path, std::span<const QueryRecord> queries) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "write_queries: cannot open " + path);
  for (const auto& q : queries)
    f << q.id << '\t' << q.domain << '\t' << q.gt_id << '\t' << escape_text(q.text) << '\n';
  if (!f) fail(ErrorKind::io, "write_queries: write failed for " + path);
}

std::vector<QueryRecord> read_queries(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::missing_artifact, "read_queries: cannot open " + path);
  std::vector<QueryRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::array<std::size_t, 3> tabs{};
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
      pos = line.find('\t', pos);
      if (pos == std::string::npos)
        fail(ErrorKind::ingest,
             "read_queries: malformed line " + std::to_string(line_no) + " in " + path);
      tabs[static_cast<std::size_t>(i)] = pos++;
    }
    QueryRecord q;
    q.id = line.substr(0, tabs[0]);
    q.domain = line.substr(tabs[0] + 1, tabs[1] - tabs[0] - 1);
    q.gt_id = line.substr(tabs[1] + 1, tabs[2] - tabs[1] - 1);
    q.text = unescape_text(std::string_view(line).substr(tabs[2] + 1), path);
    out.push_back(std::move(q));
  }
  return out;
}

BenchData generate(const BenchConfig& cfg) {
  validate(cfg);

  Rng vocab_rng(splitmix64(cfg.seed ^ 0xb0c4u));
  Rng item_rng(splitmix64(cfg.seed ^ 0x17e3u));
  Rng distractor_rng(splitmix64(cfg.seed ^ 0xd157u));
  Rng query_rng(splitmix64(cfg.seed ^ 0x9e55u));

  std::int64_t d = cfg.d_in;
  std::int64_t groups_per_domain = cfg.items_per_domain / cfg.hard_group_size;
  std::int64_t words_per_group = cfg.shared_attrs + cfg.hard_group_size;

  BenchData data;
  data.features.dim = d;

  WordMint mint(vocab_rng);
  for (std::int64_t di = 0; di < cfg.n_domains; ++di) data.domains.push_back(mint.next());

  // Per-domain attribute words with their feature-space directions. Groups use
  // disjoint word blocks so latent overlap identifies the group unambiguously.
  struct AttrWord {
    std::string word;
    std::vector<float> vec;
  };
  std::vector<std::vector<AttrWord>> vocab(static_cast<std::size_t>(cfg.n_domains));
  std::vector<std::vector<float>> signatures;
  std::int64_t next_attr_id = 0;
  for (std::int64_t di = 0; di < cfg.n_domains; ++di) {
    signatures.push_back(random_direction(vocab_rng, d, cfg.domain_scale));
    std::int64_t vocab_size = std::max<std::int64_t>(groups_per_domain * words_per_group,
                                                     cfg.attr_vocab_size);
    auto& words = vocab[static_cast<std::size_t>(di)];
    words.reserve(static_cast<std::size_t>(vocab_size));
    for (std::int64_t w = 0; w < vocab_size; ++w) {
      AttrWord aw;
      aw.word = mint.next();
      aw.vec = random_direction(vocab_rng, d, cfg.attr_scale);
      words.push_back(std::move(aw));
    }
  }

  std::vector<std::string> open_vocab;
  open_vocab.reserve(1024);
  for (int w = 0; w < 1024; ++w) open_vocab.push_back(mint.next());

  // Domain items, grouped into hard negatives.
  for (std::int64_t di = 0; di < cfg.n_domains; ++di) {
    const std::string& dom = data.domains[static_cast<std::size_t>(di)];
    const auto& sig = signatures[static_cast<std::size_t>(di)];
    const auto& words = vocab[static_cast<std::size_t>(di)];
    for (std::int64_t g = 0; g < groups_per_domain; ++g) {
      std::int64_t base = g * words_per_group;
      for (std::int64_t m = 0; m < cfg.hard_group_size; ++m) {
        std::int64_t item_idx = g * cfg.hard_group_size + m;
        const AttrWord& distinct = words[static_cast<std::size_t>(base + cfg.shared_attrs + m)];

        std::vector<float> feat(sig.begin(), sig.end());
        ItemLatents lat;
        lat.domain = static_cast<std::int32_t>(di);
        for (std::int64_t s = 0; s < cfg.shared_attrs; ++s) {
          const AttrWord& aw = words[static_cast<std::size_t>(base + s)];
          for (std::int64_t j = 0; j < d; ++j) feat[static_cast<std::size_t>(j)] += aw.vec[j];
          lat.attrs.push_back(next_attr_id + base + s);
        }
        for (std::int64_t j = 0; j < d; ++j)
          feat[static_cast<std::size_t>(j)] +=
              static_cast<float>(cfg.distinct_scale) * distinct.vec[j];
        lat.attrs.push_back(next_attr_id + base + cfg.shared_attrs + m);
        std::sort(lat.attrs.begin(), lat.attrs.end());
        for (std::int64_t j = 0; j < d; ++j)
          feat[static_cast<std::size_t>(j)] +=
              static_cast<float>(item_rng.gaussian() * cfg.noise_sigma);

        std::vector<std::string> cwords;
        int tpl = static_cast<int>(item_rng.uniform_index(3));
        if (tpl == 0) {
          cwords = {"a", dom, "piece", "showing", distinct.word};
        } else if (tpl == 1) {
          cwords = {distinct.word, "styled", dom, "work"};
        } else {
          cwords = {"this", dom, "image", "features", distinct.word};
        }
        // Captions name only a rotating subset of the shared attributes; the
        // raw features always carry all of them, so caption text alone
        // under-describes the item.
        std::int64_t cmentions = std::min(cfg.caption_shared_mentions, cfg.shared_attrs);
        if (cmentions > 0) {
          cwords.push_back("with");
          for (std::int64_t s = 0; s < cmentions; ++s) {
            std::int64_t pick = (m + s) % cfg.shared_attrs;
            cwords.push_back(words[static_cast<std::size_t>(base + pick)].word);
          }
        }
        if (cfg.caption_noise_words > 0) {
          cwords.push_back("and");
          for (std::int64_t nw = 0; nw < cfg.caption_noise_words; ++nw)
            cwords.push_back(open_vocab[static_cast<std::size_t>(
                item_rng.uniform_index(static_cast<std::int64_t>(open_vocab.size())))]);
        }

        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "%s-%05lld", dom.c_str(),
                      static_cast<long long>(item_idx));
        data.manifest.push_back({idbuf, dom, join_words(cwords)});
        data.features.data.insert(data.features.data.end(), feat.begin(), feat.end());
        data.latents.push_back(std::move(lat));
      }
    }
    next_attr_id += static_cast<std::int64_t>(words.size());
  }

  // Attribute vectors by global id, for diagnostics and construction checks.
  {
    std::int64_t id0 = 0;
    for (std::int64_t di = 0; di < cfg.n_domains; ++di) {
      const auto& words = vocab[static_cast<std::size_t>(di)];
      for (std::size_t w = 0; w < words.size(); ++w)
        data.attr_vectors.emplace(id0 + static_cast<std::int64_t>(w), words[w].vec);
      id0 += static_cast<std::int64_t>(words.size());
    }
  }

  // Background distractors: broad features, captions from the open vocabulary.
  for (std::int64_t i = 0; i < cfg.n_distractors; ++i) {
    std::vector<float> feat = random_direction(distractor_rng, d, cfg.background_scale);
    // Background norm is ~background_scale; domain items carry several summed
    // components, so scale distractors up toward a comparable magnitude.
    double boost = std::sqrt(2.0 + static_cast<double>(cfg.shared_attrs));
    for (auto& x : feat) x = static_cast<float>(x * boost);
    std::int64_t n_words = 4 + distractor_rng.uniform_index(4);
    std::vector<std::string> cwords;
    for (std::int64_t w = 0; w < n_words; ++w)
      cwords.push_back(open_vocab[static_cast<std::size_t>(
          distractor_rng.uniform_index(static_cast<std::int64_t>(open_vocab.size())))]);
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "open-%06lld", static_cast<long long>(i));
    data.manifest.push_back({idbuf, std::string(kOpenDomain), join_words(cwords)});
    data.features.data.insert(data.features.data.end(), feat.begin(), feat.end());
    data.latents.push_back({});
  }
  data.features.count = static_cast<std::int64_t>(data.manifest.size());

  // Held-out queries: fresh phrasing over the same latents, never reusing the
  // caption templates.
  for (std::int64_t di = 0; di < cfg.n_domains; ++di) {
    const std::string& dom = data.domains[static_cast<std::size_t>(di)];
    for (std::int64_t qi = 0; qi < cfg.n_queries_per_domain; ++qi) {
      std::int64_t item_idx = qi * cfg.items_per_domain / cfg.n_queries_per_domain;
      std::int64_t row = di * cfg.items_per_domain + item_idx;
      const ItemLatents& lat = data.latents[static_cast<std::size_t>(row)];

      std::int64_t g = item_idx / cfg.hard_group_size;
      std::int64_t m = item_idx % cfg.hard_group_size;
      std::int64_t base = g * words_per_group;
      const auto& words = vocab[static_cast<std::size_t>(di)];
      const std::string& distinct = words[static_cast<std::size_t>(base + cfg.shared_attrs + m)].word;

      std::vector<std::string> qwords;
      int tpl = static_cast<int>(query_rng.uniform_index(3));
      if (tpl == 0) {
        qwords = {"find", "some", dom, "item", "marked", distinct};
      } else if (tpl == 1) {
        qwords = {"looking", "for", "that", distinct, "thing", "in", dom, "style"};
      } else {
        qwords = {"retrieve", dom, "artwork", "featuring", distinct};
      }
      std::int64_t mentions = std::min(cfg.query_shared_mentions, cfg.shared_attrs);
      for (std::int64_t s = 0; s < mentions; ++s)
        qwords.push_back(words[static_cast<std::size_t>(base + s)].word);

      char idbuf[48];
      std::snprintf(idbuf, sizeof(idbuf), "q-%s-%04lld", dom.c_str(),
                    static_cast<long long>(qi));
      data.queries.push_back(
          {idbuf, dom, data.manifest[static_cast<std::size_t>(row)].id, join_words(qwords)});
      data.query_latents.push_back(lat);
    }
  }

  return data;
}

RankedList oracle_rank(const BenchData& data, std::int64_t query_index) {
  if (query_index < 0 || query_index >= static_cast<std::int64_t>(data.queries.size()))
    fail(ErrorKind::contract, "oracle_rank: query index out of range");
  if (data.latents.size() != data.manifest.size() ||
      data.query_latents.size() != data.queries.size())
    fail(ErrorKind::contract, "oracle_rank: generative latents unavailable");

  const ItemLatents& q = data.query_latents[static_cast<std::size_t>(query_index)];
  std::vector<std::pair<std::int64_t, float>> scored(data.manifest.size());
  for (std::size_t i = 0; i < data.manifest.size(); ++i) {
    const ItemLatents& it = data.latents[i];
    std::int64_t overlap = (it.domain >= 0 && it.domain == q.domain) ? 1 : 0;
    std::size_t a = 0, b = 0;
    while (a < q.attrs.size() && b < it.attrs.size()) {
      if (q.attrs[a] == it.attrs[b]) {
        ++overlap;
        ++a;
        ++b;
      } else if (q.attrs[a] < it.attrs[b]) {
        ++a;
      } else {
        ++b;
      }
    }
    scored[i] = {static_cast<std::int64_t>(i), static_cast<float>(overlap)};
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return data.manifest[static_cast<std::size_t>(x.first)].id <
           data.manifest[static_cast<std::size_t>(y.first)].id;
  });
  RankedList out;
  out.reserve(scored.size());
  for (const auto& [i, s] : scored)
    out.push_back({data.manifest[static_cast<std::size_t>(i)].id, s});
  return out;
}

}  // namespace efsa
