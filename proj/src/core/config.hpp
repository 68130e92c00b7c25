#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace efsa {

// Flat, fully-defaulted run settings. Every knob in the engine has a key
// here; unknown keys are rejected and values are validated up front.
struct RunConfig {
  std::string out_dir = "out";
  std::int64_t threads = 1;

  // benchmark generation
  std::int64_t bench_d_in = 512;
  std::int64_t bench_domains = 4;
  std::int64_t bench_items_per_domain = 384;
  std::int64_t bench_hard_group_size = 4;
  std::int64_t bench_shared_attrs = 4;
  std::int64_t bench_attr_vocab = 0;  // 0 = auto-sized
  double bench_noise_sigma = 0.05;
  std::int64_t bench_queries_per_domain = 64;
  std::int64_t bench_distractors = 20000;
  std::int64_t bench_caption_noise_words = 0;
  std::int64_t bench_caption_shared_mentions = 2;
  std::int64_t bench_query_shared_mentions = 4;
  std::uint64_t bench_seed = 1;
  double bench_domain_scale = 1.0;
  double bench_attr_scale = 1.0;
  double bench_distinct_scale = 1.5;
  double bench_background_scale = 1.0;

  // encoder towers
  std::int64_t enc_hidden = 256;
  std::int64_t enc_out = 128;
  std::string enc_nonlinearity = "tanh";

  // base pre-training; by default distractor rows are excluded, they carry no
  // caption-feature structure to learn
  std::int64_t train_steps = 9000;
  std::int64_t train_batch = 48;
  double train_lr = 0.01;
  double train_tau = 0.07;
  double train_weight_decay = 0.0;
  std::uint64_t train_seed = 42;
  bool train_include_distractors = false;

  // episodic adaptation
  std::int64_t episode_k = 16;
  std::int64_t episode_epochs = 1;
  std::uint64_t episode_seed = 42;
  std::string adapt_mode = "lora";
  double loss_tau = 0.07;
  double loss_margin = 0.2;
  double loss_alpha = 1.7;
  double loss_beta = 0.3;
  std::int64_t lora_rank = 4;
  double lora_scale = 15.0;
  double opt_lr = 0.08;
  double opt_beta1 = 0.9;
  double opt_beta2 = 0.999;
  double opt_eps = 1e-8;
  double opt_weight_decay = 0.01;

  // fine-tuning baseline
  std::int64_t ft_epochs = 4;
  std::int64_t ft_batch = 64;
  double ft_lr = 5e-4;
  std::uint64_t ft_seed = 42;

  // evaluation
  std::string eval_methods = "ZS+FT+T2T+EFSA";
  bool eval_single_domain = true;
  bool eval_export_episodes = false;
  std::string ablate_ks = "8,16,32,64";
  std::string ablate_epoch_counts = "1,2,3,4";

  // storage arithmetic
  std::int64_t storage_pool_size = 1000000;
  std::int64_t storage_d_e = 768;
  std::int64_t storage_bytes_per_scalar = 4;
  double storage_caption_tokens = 30.0;
  std::int64_t storage_bytes_per_token = 2;
};

// Applies one key=value assignment; unknown key or malformed value raises a
// config error.
void apply_kv(RunConfig& cfg, std::string_view key, std::string_view value);

// UTF-8 key=value lines, blank lines and full-line # comments allowed.
void load_config_file(RunConfig& cfg, const std::string& path);

// Range checks across all keys; raises config errors before any work runs.
void validate(const RunConfig& cfg);

// All keys, sorted.
std::vector<std::string> config_keys();

// Sorted key=value lines with every default expanded.
std::string serialize(const RunConfig& cfg);

// Stable hex digest of the serialized form.
std::string config_digest(const RunConfig& cfg);

std::vector<std::int64_t> parse_int_list(std::string_view text, std::string_view what);

}  // namespace efsa
