#include "core/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "core/common.hpp"

namespace efsa {

namespace {

enum class Kind { i64, u64, f64, boolean, str };

struct Binding {
  const char* name;
  Kind kind;
  void* ptr;
};

std::vector<Binding> bindings(RunConfig& c) {
  return {
      {"out_dir", Kind::str, &c.out_dir},
      {"threads", Kind::i64, &c.threads},
      {"bench_d_in", Kind::i64, &c.bench_d_in},
      {"bench_domains", Kind::i64, &c.bench_domains},
      {"bench_items_per_domain", Kind::i64, &c.bench_items_per_domain},
      {"bench_hard_group_size", Kind::i64, &c.bench_hard_group_size},
      {"bench_shared_attrs", Kind::i64, &c.bench_shared_attrs},
      {"bench_attr_vocab", Kind::i64, &c.bench_attr_vocab},
      {"bench_noise_sigma", Kind::f64, &c.bench_noise_sigma},
      {"bench_queries_per_domain", Kind::i64, &c.bench_queries_per_domain},
      {"bench_distractors", Kind::i64, &c.bench_distractors},
      {"bench_caption_noise_words", Kind::i64, &c.bench_caption_noise_words},
      {"bench_caption_shared_mentions", Kind::i64, &c.bench_caption_shared_mentions},
      {"bench_query_shared_mentions", Kind::i64, &c.bench_query_shared_mentions},
      {"bench_seed", Kind::u64, &c.bench_seed},
      {"bench_domain_scale", Kind::f64, &c.bench_domain_scale},
      {"bench_attr_scale", Kind::f64, &c.bench_attr_scale},
      {"bench_distinct_scale", Kind::f64, &c.bench_distinct_scale},
      {"bench_background_scale", Kind::f64, &c.bench_background_scale},
      {"enc_hidden", Kind::i64, &c.enc_hidden},
      {"enc_out", Kind::i64, &c.enc_out},
      {"enc_nonlinearity", Kind::str, &c.enc_nonlinearity},
      {"train_steps", Kind::i64, &c.train_steps},
      {"train_batch", Kind::i64, &c.train_batch},
      {"train_lr", Kind::f64, &c.train_lr},
      {"train_tau", Kind::f64, &c.train_tau},
      {"train_weight_decay", Kind::f64, &c.train_weight_decay},
      {"train_seed", Kind::u64, &c.train_seed},
      {"train_include_distractors", Kind::boolean, &c.train_include_distractors},
      {"episode_k", Kind::i64, &c.episode_k},
      {"episode_epochs", Kind::i64, &c.episode_epochs},
      {"episode_seed", Kind::u64, &c.episode_seed},
      {"adapt_mode", Kind::str, &c.adapt_mode},
      {"loss_tau", Kind::f64, &c.loss_tau},
      {"loss_margin", Kind::f64, &c.loss_margin},
      {"loss_alpha", Kind::f64, &c.loss_alpha},
      {"loss_beta", Kind::f64, &c.loss_beta},
      {"lora_rank", Kind::i64, &c.lora_rank},
      {"lora_scale", Kind::f64, &c.lora_scale},
      {"opt_lr", Kind::f64, &c.opt_lr},
      {"opt_beta1", Kind::f64, &c.opt_beta1},
      {"opt_beta2", Kind::f64, &c.opt_beta2},
      {"opt_eps", Kind::f64, &c.opt_eps},
      {"opt_weight_decay", Kind::f64, &c.opt_weight_decay},
      {"ft_epochs", Kind::i64, &c.ft_epochs},
      {"ft_batch", Kind::i64, &c.ft_batch},
      {"ft_lr", Kind::f64, &c.ft_lr},
      {"ft_seed", Kind::u64, &c.ft_seed},
      {"eval_methods", Kind::str, &c.eval_methods},
      {"eval_single_domain", Kind::boolean, &c.eval_single_domain},
      {"eval_export_episodes", Kind::boolean, &c.eval_export_episodes},
      {"ablate_ks", Kind::str, &c.ablate_ks},
      {"ablate_epoch_counts", Kind::str, &c.ablate_epoch_counts},
      {"storage_pool_size", Kind::i64, &c.storage_pool_size},
      {"storage_d_e", Kind::i64, &c.storage_d_e},
      {"storage_bytes_per_scalar", Kind::i64, &c.storage_bytes_per_scalar},
      {"storage_caption_tokens", Kind::f64, &c.storage_caption_tokens},
      {"storage_bytes_per_token", Kind::i64, &c.storage_bytes_per_token},
  };
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  fail(ErrorKind::config,
       "config: bad value \"" + std::string(value) + "\" for key " + std::string(key));
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void assign(const Binding& b, std::string_view value) {
  switch (b.kind) {
    case Kind::i64: {
      std::int64_t v = 0;
      auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
        bad_value(b.name, value);
      *static_cast<std::int64_t*>(b.ptr) = v;
      return;
    }
    case Kind::u64: {
      std::uint64_t v = 0;
      auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
        bad_value(b.name, value);
      *static_cast<std::uint64_t*>(b.ptr) = v;
      return;
    }
    case Kind::f64: {
      double v = 0;
      auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc{} || res.ptr != value.data() + value.size() ||
          !std::isfinite(v))
        bad_value(b.name, value);
      *static_cast<double*>(b.ptr) = v;
      return;
    }
    case Kind::boolean: {
      bool v = false;
      if (value == "true" || value == "1")
        v = true;
      else if (value == "false" || value == "0")
        v = false;
      else
        bad_value(b.name, value);
      *static_cast<bool*>(b.ptr) = v;
      return;
    }
    case Kind::str:
      *static_cast<std::string*>(b.ptr) = std::string(value);
      return;
  }
}

std::string render(const Binding& b) {
  switch (b.kind) {
    case Kind::i64: return std::to_string(*static_cast<const std::int64_t*>(b.ptr));
    case Kind::u64: return std::to_string(*static_cast<const std::uint64_t*>(b.ptr));
    case Kind::f64: return format_double(*static_cast<const double*>(b.ptr));
    case Kind::boolean: return *static_cast<const bool*>(b.ptr) ? "true" : "false";
    case Kind::str: return *static_cast<const std::string*>(b.ptr);
  }
  return {};
}

void check(bool ok, const std::string& msg) {
  if (!ok) fail(ErrorKind::config, "config: " + msg);
}

void validate_method_list(const std::string& text) {
  check(!text.empty(), "eval_methods must not be empty");
  std::size_t start = 0;
  int count = 0;
  while (start <= text.size()) {
    std::size_t end = text.find_first_of("+,", start);
    if (end == std::string::npos) end = text.size();
    std::string tok = std::string(trim(std::string_view(text).substr(start, end - start)));
    check(!tok.empty(), "eval_methods has an empty entry");
    check(tok == "ZS" || tok == "zs" || tok == "zero-shot" || tok == "FT" || tok == "ft" ||
              tok == "finetune" || tok == "T2T" || tok == "t2t" || tok == "EFSA" ||
              tok == "efsa",
          "unknown method in eval_methods: " + tok);
    ++count;
    if (end == text.size()) break;
    start = end + 1;
  }
  check(count > 0, "eval_methods must name at least one method");
}

}  // namespace

void apply_kv(RunConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const Binding& b : bindings(cfg)) {
    if (key == b.name) {
      assign(b, value);
      return;
    }
  }
  fail(ErrorKind::config, "config: unknown key " + std::string(key));
}

void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::config, "config: cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorKind::config, "config: line " + std::to_string(line_no) + " of " + path +
                                  " is not key=value");
    apply_kv(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
}

void validate(const RunConfig& c) {
  check(!c.out_dir.empty(), "out_dir must not be empty");
  check(c.threads >= 1, "threads must be at least 1");

  check(c.bench_d_in >= 1, "bench_d_in must be positive");
  check(c.bench_domains >= 1, "bench_domains must be positive");
  check(c.bench_items_per_domain >= 1, "bench_items_per_domain must be positive");
  check(c.bench_hard_group_size >= 2, "bench_hard_group_size must be at least 2");
  check(c.bench_items_per_domain % c.bench_hard_group_size == 0,
        "bench_items_per_domain must be a multiple of bench_hard_group_size");
  check(c.bench_shared_attrs >= 0, "bench_shared_attrs must be non-negative");
  if (c.bench_attr_vocab != 0) {
    std::int64_t groups = c.bench_items_per_domain / c.bench_hard_group_size;
    check(c.bench_attr_vocab >= groups * (c.bench_shared_attrs + c.bench_hard_group_size),
          "bench_attr_vocab is too small for the hard-group layout");
  }
  check(c.bench_noise_sigma >= 0, "bench_noise_sigma must be non-negative");
  check(c.bench_queries_per_domain >= 0 &&
            c.bench_queries_per_domain <= c.bench_items_per_domain,
        "bench_queries_per_domain must be in [0, bench_items_per_domain]");
  check(c.bench_distractors >= 0, "bench_distractors must be non-negative");
  check(c.bench_caption_noise_words >= 0, "bench_caption_noise_words must be non-negative");
  check(c.bench_caption_shared_mentions >= 0,
        "bench_caption_shared_mentions must be non-negative");
  check(c.bench_query_shared_mentions >= 0,
        "bench_query_shared_mentions must be non-negative");
  check(c.bench_domain_scale >= 0 && c.bench_attr_scale >= 0 && c.bench_distinct_scale >= 0 &&
            c.bench_background_scale >= 0,
        "benchmark scales must be non-negative");

  check(c.enc_hidden >= 0, "enc_hidden must be non-negative (0 = single layer)");
  check(c.enc_out >= 1, "enc_out must be positive");
  check(c.enc_nonlinearity == "tanh" || c.enc_nonlinearity == "relu",
        "enc_nonlinearity must be tanh or relu");

  check(c.train_steps >= 1, "train_steps must be positive");
  check(c.train_batch >= 2, "train_batch must be at least 2");
  check(c.train_lr >= 0, "train_lr must be non-negative");
  check(c.train_tau > 0, "train_tau must be positive");
  check(c.train_weight_decay >= 0, "train_weight_decay must be non-negative");

  check(c.episode_k >= 1, "episode_k must be positive");
  check(c.episode_epochs >= 0, "episode_epochs must be non-negative");
  check(c.adapt_mode == "lora" || c.adapt_mode == "full",
        "adapt_mode must be lora or full");
  check(c.loss_tau > 0, "loss_tau must be positive");
  check(c.loss_margin >= 0, "loss_margin must be non-negative");
  check(c.loss_alpha >= 0 && c.loss_beta >= 0, "loss weights must be non-negative");
  check(c.loss_alpha + c.loss_beta > 0, "loss_alpha and loss_beta must not both be zero");
  check(c.lora_rank >= 1, "lora_rank must be positive");
  check(c.lora_scale >= 0, "lora_scale must be non-negative");
  check(c.opt_lr >= 0, "opt_lr must be non-negative");
  check(c.opt_beta1 >= 0 && c.opt_beta1 < 1, "opt_beta1 must be in [0, 1)");
  check(c.opt_beta2 >= 0 && c.opt_beta2 < 1, "opt_beta2 must be in [0, 1)");
  check(c.opt_eps > 0, "opt_eps must be positive");
  check(c.opt_weight_decay >= 0, "opt_weight_decay must be non-negative");

  check(c.ft_epochs >= 0, "ft_epochs must be non-negative");
  check(c.ft_batch >= 2, "ft_batch must be at least 2");
  check(c.ft_lr >= 0, "ft_lr must be non-negative");

  validate_method_list(c.eval_methods);
  for (std::int64_t k : parse_int_list(c.ablate_ks, "ablate_ks"))
    check(k >= 1, "ablate_ks entries must be positive");
  for (std::int64_t e : parse_int_list(c.ablate_epoch_counts, "ablate_epoch_counts"))
    check(e >= 0, "ablate_epoch_counts entries must be non-negative");

  check(c.storage_pool_size >= 1, "storage_pool_size must be positive");
  check(c.storage_d_e >= 1, "storage_d_e must be positive");
  check(c.storage_bytes_per_scalar >= 1, "storage_bytes_per_scalar must be positive");
  check(c.storage_caption_tokens >= 0, "storage_caption_tokens must be non-negative");
  check(c.storage_bytes_per_token >= 1, "storage_bytes_per_token must be positive");
}

std::vector<std::string> config_keys() {
  RunConfig c;
  std::vector<std::string> keys;
  for (const Binding& b : bindings(c)) keys.emplace_back(b.name);
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::string serialize(const RunConfig& cfg) {
  auto& mut = const_cast<RunConfig&>(cfg);  // bindings are read through const paths here
  std::vector<std::pair<std::string, std::string>> kv;
  for (const Binding& b : bindings(mut)) kv.emplace_back(b.name, render(b));
  std::sort(kv.begin(), kv.end());
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::string config_digest(const RunConfig& cfg) {
  std::string s = serialize(cfg);
  return hex_u64(fnv1a64(s.data(), s.size()));
}

std::vector<std::int64_t> parse_int_list(std::string_view text, std::string_view what) {
  std::vector<std::int64_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view tok = trim(text.substr(start, end - start));
    if (tok.empty())
      fail(ErrorKind::config, "config: empty entry in " + std::string(what));
    std::int64_t v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
      fail(ErrorKind::config,
           "config: bad integer \"" + std::string(tok) + "\" in " + std::string(what));
    out.push_back(v);
    if (end == text.size()) break;
    start = end + 1;
  }
  if (out.empty()) fail(ErrorKind::config, "config: " + std::string(what) + " is empty");
  return out;
}

}  // namespace efsa
