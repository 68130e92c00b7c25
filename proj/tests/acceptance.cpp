// Acceptance gate: one pass/fail line per criterion, tolerances pinned here.
// Criteria needing pipeline artifacts run against freshly built out-dirs under
// ./acceptance_work; heavy builds are shared between criteria.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "core/bench.hpp"
#include "core/common.hpp"
#include "core/config.hpp"
#include "core/encoder.hpp"
#include "core/episode.hpp"
#include "core/eval.hpp"
#include "core/lora.hpp"
#include "core/losses.hpp"
#include "core/pipeline.hpp"
#include "core/pool.hpp"
#include "core/tensor.hpp"

namespace {

using namespace efsa;

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg) {
  if (!cond) throw Failure(msg);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<RecallRow> parse_report_csv(const std::string& path) {
  std::istringstream in(slurp(path));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), path + ": empty");
  require(line == "domain,method,r1,r5,r10", path + ": bad header " + line);
  std::vector<RecallRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    require(f.size() == 5, path + ": bad row " + line);
    rows.push_back({f[0], f[1], std::stod(f[2]), std::stod(f[3]), std::stod(f[4])});
  }
  return rows;
}

std::map<std::string, std::string> parse_kv(const std::string& path) {
  std::istringstream in(slurp(path));
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

// Mirrors the eval command's RunConfig -> SuiteConfig mapping.
SuiteConfig suite_from(const RunConfig& c) {
  SuiteConfig sc;
  sc.episode.k = c.episode_k;
  sc.episode.epochs = c.episode_epochs;
  sc.episode.seed = c.episode_seed;
  sc.episode.adapt = AdaptMode::lora;
  sc.episode.loss = {c.loss_tau, c.loss_margin, c.loss_alpha, c.loss_beta};
  sc.episode.lora = {c.lora_rank, c.lora_scale};
  sc.episode.opt = {c.opt_lr, c.opt_beta1, c.opt_beta2, c.opt_eps, c.opt_weight_decay};
  sc.finetune.epochs = c.ft_epochs;
  sc.finetune.batch = c.ft_batch;
  sc.finetune.loss = sc.episode.loss;
  sc.finetune.lora = sc.episode.lora;
  sc.finetune.opt = {c.ft_lr, c.opt_beta1, c.opt_beta2, c.opt_eps, c.opt_weight_decay};
  sc.finetune.seed = c.ft_seed;
  sc.threads = 1;
  return sc;
}

RunConfig seeded_config(const std::string& out_dir, std::uint64_t seed) {
  RunConfig cfg;
  cfg.out_dir = out_dir;
  cfg.bench_seed = seed;
  cfg.train_seed = seed;
  cfg.episode_seed = seed;
  cfg.ft_seed = seed;
  cfg.eval_single_domain = false;
  return cfg;
}

struct Shared {
  std::string work = "acceptance_work";

  // seed-1 default-benchmark artifacts, loaded after the gain criterion builds them
  PoolStore pool;
  MatrixFile features;
  EncoderParams vision, text;
  std::vector<QueryRecord> queries;
  RunConfig seed1_cfg;
  bool loaded = false;

  // average-row recall by method label, one map per benchmark seed
  std::vector<std::map<std::string, RecallRow>> seed_avgs;
  double epoch1_avg_r5 = -1.0;

  // every report row emitted by any run in this process
  std::vector<RecallRow> rows;

  void load_seed1() {
    if (loaded) return;
    Artifacts art(seed1_cfg.out_dir);
    pool = PoolStore::load(art.pool(), art.manifest());
    features = read_matrix_file(art.features(), kFeatureMagic);
    vision = load_encoder(art.vision_encoder());
    text = load_encoder(art.text_encoder());
    queries = read_queries(art.queries());
    loaded = true;
  }
};

// ---- criterion 1: combined-loss gradients vs central differences ----------

std::string crit_gradients() {
  auto t0 = std::chrono::steady_clock::now();
  const LossConfig lc{0.07, 0.2, 1.7, 0.3};
  const double kTol = 1e-4;
  const double kKinkBand = 5e-3;  // hinge terms this close to zero make the seed untestable
  // truncation error scales as h^2 and the adapter scale factor amplifies
  // perturbations; 5e-5 sits well under the tolerance with no cancellation
  const double kStep = 5e-5;
  const EncoderDims dims{12, 10, 8};
  const std::int64_t n = 4;

  double worst = 0.0;
  int tested = 0, skipped = 0;
  for (int seed = 0; seed < 50; ++seed) {
    EncoderParams vision = init_encoder(1000 + seed, dims);
    EncoderParams text = init_encoder(2000 + seed, dims);
    AdapterSet v_ad = AdapterSet::attach(vision, {2, 15.0}, 3000 + seed);
    AdapterSet t_ad = AdapterSet::attach(text, {2, 15.0}, 4000 + seed);

    Rng rng(5000 + seed);
    std::vector<Tensor> params = v_ad.parameters();
    for (const Tensor& p : t_ad.parameters()) params.push_back(p);
    for (Tensor& p : params) {
      auto d = p.mutable_data();
      for (double& v : d) v = 0.1 * rng.gaussian();
    }

    std::vector<double> xi(static_cast<std::size_t>(n * dims.d_in));
    std::vector<double> xt(xi.size());
    for (double& v : xi) v = rng.gaussian();
    for (double& v : xt) v = rng.gaussian();
    Tensor X = Tensor::from_data({n, dims.d_in}, xi);
    Tensor T = Tensor::from_data({n, dims.d_in}, xt);

    // skip seeds with a hinge term near its kink: central differences straddle it
    Tensor sims = similarity_matrix(encode_forward(vision, X, &v_ad),
                                    encode_forward(text, T, &t_ad));
    bool near_kink = false;
    auto s = sims.data();
    for (std::int64_t i = 0; i < n && !near_kink; ++i)
      for (std::int64_t j = 0; j < n; ++j)
        if (i != j && std::abs(lc.margin - s[i * n + i] + s[i * n + j]) < kKinkBand) {
          near_kink = true;
          break;
        }
    if (near_kink) {
      ++skipped;
      continue;
    }

    auto f = [&] {
      Tensor img = encode_forward(vision, X, &v_ad);
      Tensor txt = encode_forward(text, T, &t_ad);
      return combined_loss(img, txt, lc);
    };
    double err = grad_check(f, params, kStep);
    worst = std::max(worst, err);
    require(err < kTol, "seed " + std::to_string(seed) + ": max rel err " + fmt(err, "%.3e"));
    ++tested;
  }
  require(skipped <= 20, "too many kink-adjacent seeds skipped: " + std::to_string(skipped));
  double el = seconds_since(t0);
  require(el < 60.0, "over budget: " + fmt(el, "%.1f") + "s >= 60s");
  return "max rel err " + fmt(worst, "%.2e") + " over " + std::to_string(tested) +
         " seeds (" + std::to_string(skipped) + " kink-adjacent skipped), " +
         fmt(el, "%.1f") + "s < 60s";
}

// ---- criterion 2: episode reset leaves zero-shot ranking bit-identical ----

std::string crit_reset(Shared& sh) {
  sh.load_seed1();
  auto t0 = std::chrono::steady_clock::now();
  SuiteConfig sc = suite_from(sh.seed1_cfg);
  const int kEpisodes = 200;
  require(static_cast<int>(sh.queries.size()) >= kEpisodes,
          "benchmark has fewer than 200 queries");

  for (int i = 0; i < kEpisodes; ++i) {
    QueryInput q{sh.queries[i].id, sh.queries[i].text, {}, false};
    Embedding before_emb = embed_query(sh.text, q);
    RankedList before = zero_shot_rank(sh.pool, before_emb);

    EpisodeResult er = run_episode(sh.pool, &sh.features, q, sc.episode, sh.vision, sh.text);
    require(!er.aborted, "episode aborted for " + q.id);

    Embedding after_emb = embed_query(sh.text, q);
    RankedList after = zero_shot_rank(sh.pool, after_emb);

    require(before_emb.size() == after_emb.size() &&
                std::equal(before_emb.begin(), before_emb.end(), after_emb.begin(),
                           [](float a, float b) {
                             return std::bit_cast<std::uint32_t>(a) ==
                                    std::bit_cast<std::uint32_t>(b);
                           }),
            "query embedding changed after episode " + q.id);
    require(before.size() == after.size(), "ranking size changed for " + q.id);
    for (std::size_t r = 0; r < before.size(); ++r)
      require(before[r].id == after[r].id &&
                  std::bit_cast<std::uint32_t>(before[r].score) ==
                      std::bit_cast<std::uint32_t>(after[r].score),
              "ranking drifted at depth " + std::to_string(r) + " for " + q.id);
  }
  double el = seconds_since(t0);
  require(el < 120.0, "over budget: " + fmt(el, "%.1f") + "s >= 120s");
  return std::to_string(kEpisodes) + "/" + std::to_string(kEpisodes) +
         " episodes bit-identical, " + fmt(el, "%.1f") + "s < 120s";
}

// ---- criterion 3: freshly attached adapters are a bitwise identity --------

std::string crit_identity() {
  const EncoderDims dims{24, 20, 12};
  EncoderParams enc = init_encoder(11, dims);
  AdapterSet ad = AdapterSet::attach(enc, {3, 15.0}, 12);

  const std::int64_t n = 1000;
  Rng rng(13);
  std::vector<float> inputs(static_cast<std::size_t>(n * dims.d_in));
  for (float& v : inputs) v = static_cast<float>(rng.gaussian());

  std::vector<float> plain = encode_batch(enc, inputs.data(), n, nullptr, 1);
  std::vector<float> adapted = encode_batch(enc, inputs.data(), n, &ad, 1);
  require(plain.size() == adapted.size(), "embedding size mismatch");
  for (std::size_t i = 0; i < plain.size(); ++i)
    require(std::bit_cast<std::uint32_t>(plain[i]) == std::bit_cast<std::uint32_t>(adapted[i]),
            "embedding bits changed at coordinate " + std::to_string(i));
  return "1000 inputs, all embeddings bitwise unchanged";
}

// ---- criterion 4: chunked top-k equals a naive full sort ------------------

std::string crit_topk() {
  auto t0 = std::chrono::steady_clock::now();
  const std::int64_t n = 10000, dim = 32;
  const std::vector<std::int64_t> ks = {1, 5, 10, 16, 64};

  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(900 + seed);
    std::vector<float> data;
    data.reserve(static_cast<std::size_t>(n * dim));
    std::vector<ManifestRecord> manifest(static_cast<std::size_t>(n));

    // shuffled ids so id tie-breaks disagree with row order
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (std::int64_t i = n - 1; i > 0; --i)
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[static_cast<std::size_t>(rng.uniform_index(i + 1))]);

    for (std::int64_t i = 0; i < n; ++i) {
      char id[16];
      std::snprintf(id, sizeof(id), "r-%05lld",
                    static_cast<long long>(perm[static_cast<std::size_t>(i)]));
      manifest[static_cast<std::size_t>(i)] = {id, "d", ""};
      if (i >= 1000 && rng.uniform(0.0, 1.0) < 0.1) {
        // duplicate an earlier row: exact score tie, must resolve by id
        std::int64_t src = rng.uniform_index(i);
        auto from = data.begin() + src * dim;
        data.insert(data.end(), from, from + dim);
        continue;
      }
      std::vector<double> v(static_cast<std::size_t>(dim));
      double norm = 0.0;
      for (double& x : v) {
        x = rng.gaussian();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (double x : v) data.push_back(static_cast<float>(x / norm));
    }
    PoolStore pool = PoolStore::build(std::move(data), dim, std::move(manifest));

    std::vector<double> qd(static_cast<std::size_t>(dim));
    double qn = 0.0;
    for (double& x : qd) {
      x = rng.gaussian();
      qn += x * x;
    }
    qn = std::sqrt(qn);
    std::vector<float> q(static_cast<std::size_t>(dim));
    for (std::int64_t i = 0; i < dim; ++i)
      q[static_cast<std::size_t>(i)] = static_cast<float>(qd[static_cast<std::size_t>(i)] / qn);

    // naive oracle: full scores, total order (score desc, id asc)
    RankedList full(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
      full[static_cast<std::size_t>(i)] = {pool.record(i).id, cosine(q, pool.row(i))};
    std::sort(full.begin(), full.end(), [](const RankedEntry& a, const RankedEntry& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.id < b.id;
    });

    for (std::int64_t k : ks) {
      RankedList got = pool.top_k(q, k, 3);
      require(got.size() == static_cast<std::size_t>(k), "top_k size mismatch");
      for (std::int64_t i = 0; i < k; ++i) {
        const auto& g = got[static_cast<std::size_t>(i)];
        const auto& o = full[static_cast<std::size_t>(i)];
        require(g.id == o.id && std::bit_cast<std::uint32_t>(g.score) ==
                                    std::bit_cast<std::uint32_t>(o.score),
                "seed " + std::to_string(seed) + " k=" + std::to_string(k) + " rank " +
                    std::to_string(i) + ": got " + g.id + " want " + o.id);
      }
    }
  }
  double el = seconds_since(t0);
  require(el < 60.0, "over budget: " + fmt(el, "%.1f") + "s >= 60s");
  return "20 seeds x k in {1,5,10,16,64} on 10^4 vectors, " + fmt(el, "%.1f") + "s < 60s";
}

// ---- criterion 5: loss unit values -----------------------------------------

std::string crit_loss_units() {
  Tensor one = Tensor::from_data({1, 1}, {0.37});
  double v1 = contrastive_from_sims(one, 0.07).item();
  require(std::abs(v1) <= 1e-12, "N=1 contrastive " + fmt(v1, "%.3e") + " != 0");

  Tensor flat = Tensor::from_data({3, 3}, std::vector<double>(9, 0.5));
  double v3 = contrastive_from_sims(flat, 0.07).item();
  require(std::abs(v3 - std::log(3.0)) <= 1e-5,
          "equal-similarity N=3 contrastive " + fmt(v3, "%.7f") + " != ln 3");

  Tensor pair = Tensor::from_data({2, 2}, std::vector<double>(4, 0.73));
  double vh = hinge_from_sims(pair, 0.2).item();
  require(std::abs(vh - 0.2) <= 1e-6, "all-equal N=2 hinge " + fmt(vh, "%.8f") + " != 0.2");

  return "N=1 contrastive = 0, equal-sim N=3 = ln 3 (tol 1e-5), all-equal hinge = 0.2 (tol 1e-6)";
}

// ---- criterion 6: adaptation gain over zero-shot, 3 benchmark seeds --------

std::string crit_gain(Shared& sh) {
  auto t0 = std::chrono::steady_clock::now();
  double zs_sum = 0.0, efsa_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::fprintf(stderr, "  [gain] building benchmark seed %llu (gen/train/index/eval)\n",
                 static_cast<unsigned long long>(seed));
    RunConfig cfg = seeded_config(sh.work + "/seed" + std::to_string(seed), seed);
    validate(cfg);
    cmd_gen(cfg);
    cmd_train_base(cfg);
    cmd_index(cfg);
    cmd_eval(cfg);
    if (seed == 1) sh.seed1_cfg = cfg;

    Artifacts art(cfg.out_dir);
    auto rows = parse_report_csv(art.reports() + "/report_multi.csv");
    auto kv = parse_kv(art.reports() + "/report_multi.kv");
    sh.rows.insert(sh.rows.end(), rows.begin(), rows.end());

    // benchmark shape preconditions
    require(std::stoll(kv.at("meta.domains")) >= 4, "fewer than 4 domains");
    require(std::stoll(kv.at("meta.queries")) >= 200, "fewer than 200 queries");
    require(cfg.bench_distractors >= 20000, "fewer than 20k distractors");
    require(std::stoll(kv.at("meta.pool_size")) ==
                cfg.bench_domains * cfg.bench_items_per_domain + cfg.bench_distractors,
            "pool size inconsistent with benchmark config");

    std::map<std::string, RecallRow> avg;
    for (const auto& r : rows)
      if (r.domain == "average") avg[r.method] = r;
    require(avg.count("ZS") && avg.count("EFSA") && avg.count("T2T") && avg.count("FT"),
            "missing method averages in report");
    double zs = avg["ZS"].r1;
    require(zs >= 0.35 && zs <= 0.65,
            "seed " + std::to_string(seed) + " zero-shot R@1 " + fmt(zs) +
                " outside [0.35, 0.65]");
    zs_sum += zs;
    efsa_sum += avg["EFSA"].r1;
    sh.seed_avgs.push_back(std::move(avg));
  }
  double zs_mean = zs_sum / 3.0, efsa_mean = efsa_sum / 3.0;
  double el = seconds_since(t0);
  require(efsa_mean >= zs_mean + 0.03, "EFSA mean R@1 " + fmt(efsa_mean) + " < ZS mean " +
                                           fmt(zs_mean) + " + 0.03");
  require(el < 900.0, "over budget: " + fmt(el, "%.1f") + "s >= 900s");
  return "EFSA mean R@1 " + fmt(efsa_mean) + " vs ZS " + fmt(zs_mean) + " (gain " +
         fmt(efsa_mean - zs_mean, "%+.4f") + " >= +0.03), 3 seeds, " + fmt(el, "%.0f") +
         "s < 900s";
}

// ---- criterion 7: baseline ordering ----------------------------------------

std::string crit_ordering(Shared& sh) {
  require(sh.seed_avgs.size() == 3, "3-seed averages unavailable");
  double zs = 0, t2t = 0, ft = 0, ef = 0;
  for (auto& avg : sh.seed_avgs) {
    zs += avg["ZS"].r1;
    t2t += avg["T2T"].r1;
    ft += avg["FT"].r1;
    ef += avg["EFSA"].r1;
  }
  zs /= 3.0, t2t /= 3.0, ft /= 3.0, ef /= 3.0;
  require(t2t < zs, "T2T mean R@1 " + fmt(t2t) + " not below ZS " + fmt(zs));
  require(ft <= ef, "FT mean R@1 " + fmt(ft) + " beats EFSA " + fmt(ef));
  return "T2T " + fmt(t2t) + " < ZS " + fmt(zs) + "; FT " + fmt(ft) + " <= EFSA " + fmt(ef);
}

// ---- criterion 8: recall monotonicity in every emitted row -----------------

std::string crit_monotonic(Shared& sh) {
  require(!sh.rows.empty(), "no report rows collected");
  for (const auto& r : sh.rows)
    require(r.r1 <= r.r5 && r.r5 <= r.r10, "row " + r.domain + "/" + r.method +
                                               " not monotone: " + fmt(r.r1) + "," +
                                               fmt(r.r5) + "," + fmt(r.r10));
  return std::to_string(sh.rows.size()) + " rows, R@1 <= R@5 <= R@10 in all";
}

// ---- criterion 9: one adaptation epoch is enough ---------------------------

std::string crit_epochs(Shared& sh) {
  sh.load_seed1();
  SuiteConfig sc = suite_from(sh.seed1_cfg);
  sc.methods = {Method::efsa};

  sc.episode.epochs = 1;
  SuiteResult one = run_suite(sh.pool, &sh.features, sh.vision, sh.text, sh.queries, sc);
  sc.episode.epochs = 4;
  SuiteResult four = run_suite(sh.pool, &sh.features, sh.vision, sh.text, sh.queries, sc);
  sh.rows.insert(sh.rows.end(), one.rows.begin(), one.rows.end());
  sh.rows.insert(sh.rows.end(), four.rows.begin(), four.rows.end());

  auto avg_r5 = [](const SuiteResult& sr) {
    for (const auto& r : sr.rows)
      if (r.domain == "average" && r.method == "EFSA") return r.r5;
    throw Failure("no EFSA average row");
  };
  double r5_1 = avg_r5(one), r5_4 = avg_r5(four);
  sh.epoch1_avg_r5 = r5_1;

  // containment bound for the k-sweep criterion: recall at any depth <= k is
  // capped by the fraction of queries whose ground truth survived retrieval
  for (const auto& r : one.rows)
    if (r.method == "EFSA" && r.domain == "average")
      require(r.r1 <= one.gt_in_candidates && r.r5 <= one.gt_in_candidates &&
                  r.r10 <= one.gt_in_candidates,
              "adapted recall exceeds candidate ceiling");

  require(r5_4 <= r5_1 + 0.02, "R@5 at 4 epochs " + fmt(r5_4) + " > R@5 at 1 epoch " +
                                   fmt(r5_1) + " + 0.02");
  return "avg R@5: 1 epoch " + fmt(r5_1) + ", 4 epochs " + fmt(r5_4) + " (<= " +
         fmt(r5_1 + 0.02) + ")";
}

// ---- criterion 10: k sweep trend and containment ----------------------------

std::string crit_topk_sweep(Shared& sh) {
  sh.load_seed1();
  SuiteConfig sc = suite_from(sh.seed1_cfg);
  sc.methods = {Method::efsa};
  const std::vector<std::int64_t> ks = {8, 16, 32, 64};
  AblationReport rep =
      ablate_topk(sh.pool, &sh.features, sh.vision, sh.text, sh.queries, sc, ks);
  sh.rows.insert(sh.rows.end(), rep.rows.begin(), rep.rows.end());

  double r10_k8 = -1, r10_k32 = -1;
  for (const auto& r : rep.rows) {
    if (r.domain != "average") continue;
    if (r.method == "EFSA[k=8]") r10_k8 = r.r10;
    if (r.method == "EFSA[k=32]") r10_k32 = r.r10;
  }
  require(r10_k8 >= 0 && r10_k32 >= 0, "missing k-sweep average rows");

  int containment_notes = 0;
  for (const auto& [key, value] : rep.notes)
    if (key.rfind("containment_ok", 0) == 0) {
      ++containment_notes;
      require(value == "true", key + " = " + value);
    }
  require(containment_notes == static_cast<int>(ks.size()),
          "expected one containment note per k");

  require(r10_k32 >= r10_k8 - 0.005, "R@10 at k=32 " + fmt(r10_k32) + " < R@10 at k=8 " +
                                         fmt(r10_k8) + " - 0.005");
  return "R@10 k=8 " + fmt(r10_k8) + " -> k=32 " + fmt(r10_k32) +
         "; containment exact for k in {8,16,32,64}";
}

// ---- criterion 11: storage arithmetic ---------------------------------------

std::string crit_storage(Shared& sh) {
  StorageReport rep = storage_report(1000000, 768, 4, 30.0, 2);
  require(rep.embedding_bytes_per_item == 3072.0,
          "bytes per image " + fmt(rep.embedding_bytes_per_item, "%.1f") + " != 3072");
  require(rep.caption_bytes_per_item == 60.0,
          "bytes per caption " + fmt(rep.caption_bytes_per_item, "%.1f") + " != 60");
  require(rep.relative_overhead == 0.01953125,
          "overhead " + fmt(rep.relative_overhead, "%.10f") + " != 0.01953125");

  RunConfig cfg;
  cfg.out_dir = sh.work + "/storage";
  std::string text = cmd_report_storage(cfg);
  require(text.find("embedding_bytes_per_item=3072") != std::string::npos,
          "report text missing 3072: " + text);
  require(text.find("caption_bytes_per_item=60") != std::string::npos,
          "report text missing 60: " + text);
  require(text.find("relative_overhead=0.01953125") != std::string::npos,
          "report text missing exact ratio: " + text);
  require(text.find("2%") != std::string::npos, "report text missing 2%: " + text);
  return "3072 bytes/image, 60 bytes/caption, ratio 0.01953125 printed as 2%";
}

// ---- criterion 12: byte-identical reports across runs and thread counts ----

std::string crit_determinism(Shared& sh) {
  auto small = [&](const std::string& dir, std::int64_t threads) {
    RunConfig cfg;
    cfg.out_dir = sh.work + "/" + dir;
    cfg.threads = threads;
    cfg.bench_domains = 2;
    cfg.bench_items_per_domain = 48;
    cfg.bench_queries_per_domain = 8;
    cfg.bench_distractors = 1200;
    cfg.bench_d_in = 256;
    cfg.enc_hidden = 128;
    cfg.enc_out = 64;
    cfg.train_steps = 300;
    validate(cfg);
    return cfg;
  };

  std::vector<std::string> digests;
  for (auto& [dir, threads] : std::vector<std::pair<std::string, std::int64_t>>{
           {"det_a", 1}, {"det_b", 1}, {"det_c", 8}}) {
    RunConfig cfg = small(dir, threads);
    digests.push_back(cmd_gen(cfg).digest);
    cmd_train_base(cfg);
    cmd_index(cfg);
    cmd_eval(cfg);
  }
  require(digests[0] == digests[1] && digests[0] == digests[2],
          "generated datasets differ across runs");

  for (const char* name : {"report_multi.csv", "report_single.csv"}) {
    std::string a = slurp(sh.work + "/det_a/reports/" + name);
    std::string b = slurp(sh.work + "/det_b/reports/" + name);
    std::string c = slurp(sh.work + "/det_c/reports/" + name);
    require(a == b, std::string(name) + " differs across identical runs");
    require(a == c, std::string(name) + " differs between --threads 1 and --threads 8");
  }

  auto rows = parse_report_csv(sh.work + "/det_a/reports/report_multi.csv");
  auto single = parse_report_csv(sh.work + "/det_a/reports/report_single.csv");
  sh.rows.insert(sh.rows.end(), rows.begin(), rows.end());
  sh.rows.insert(sh.rows.end(), single.begin(), single.end());
  return "gen digests and report CSVs byte-identical across rerun and threads 1 vs 8";
}

struct Verdict {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

}  // namespace

int main() {
  std::filesystem::remove_all("acceptance_work");
  std::filesystem::create_directories("acceptance_work");

  Shared sh;
  std::vector<Verdict> verdicts;
  auto run = [&](int id, const std::string& name, const std::function<std::string()>& body) {
    std::fprintf(stderr, "[criterion %d] %s\n", id, name.c_str());
    try {
      verdicts.push_back({id, name, true, body()});
    } catch (const std::exception& e) {
      verdicts.push_back({id, name, false, e.what()});
    }
  };

  // dependency order: cheap standalone checks, then the benchmark builds,
  // then everything that reuses those artifacts
  run(1, "loss gradients vs central differences", crit_gradients);
  run(3, "adapters are identity at attach", crit_identity);
  run(4, "top-k matches naive full sort", crit_topk);
  run(5, "loss unit values", crit_loss_units);
  run(11, "storage arithmetic", [&] { return crit_storage(sh); });
  run(6, "episodic adaptation gain", [&] { return crit_gain(sh); });
  run(2, "episode reset restores zero-shot ranking", [&] { return crit_reset(sh); });
  run(7, "baseline ordering", [&] { return crit_ordering(sh); });
  run(9, "single-epoch adaptation suffices", [&] { return crit_epochs(sh); });
  run(10, "k-sweep trend and containment", [&] { return crit_topk_sweep(sh); });
  run(12, "deterministic reports", [&] { return crit_determinism(sh); });
  run(8, "recall monotonicity", [&] { return crit_monotonic(sh); });

  std::sort(verdicts.begin(), verdicts.end(),
            [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
  int failed = 0;
  for (const auto& v : verdicts) {
    failed += v.pass ? 0 : 1;
    std::printf("%s  criterion %2d  %-42s %s\n", v.pass ? "PASS" : "FAIL", v.id,
                v.name.c_str(), v.detail.c_str());
  }
  std::printf("%d/12 criteria passed\n", 12 - failed);
  return failed == 0 ? 0 : 1;
}
