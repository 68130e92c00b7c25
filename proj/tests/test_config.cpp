#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "core/common.hpp"
#include "core/config.hpp"

using namespace efsa;

namespace {

std::optional<ErrorKind> kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("defaults validate and carry the documented values") {
  RunConfig c;
  validate(c);
  CHECK(c.loss_alpha == 1.7);
  CHECK(c.loss_beta == 0.3);
  CHECK(c.loss_tau == 0.07);
  CHECK(c.loss_margin == 0.2);
  CHECK(c.episode_k == 16);
  CHECK(c.storage_d_e == 768);
  CHECK(c.storage_caption_tokens == 30.0);
  CHECK(c.eval_methods == "ZS+FT+T2T+EFSA");
}

TEST_CASE("apply_kv routes by key and trims whitespace") {
  RunConfig c;
  apply_kv(c, "episode_k", "32");
  CHECK(c.episode_k == 32);
  apply_kv(c, "  bench_seed ", " 77 ");
  CHECK(c.bench_seed == 77);
  apply_kv(c, "loss_alpha", "2.25");
  CHECK(c.loss_alpha == 2.25);
  apply_kv(c, "eval_single_domain", "false");
  CHECK(c.eval_single_domain == false);
  apply_kv(c, "eval_single_domain", "1");
  CHECK(c.eval_single_domain == true);
  apply_kv(c, "out_dir", "runs/a");
  CHECK(c.out_dir == "runs/a");

  CHECK(kind_of([&] { apply_kv(c, "no_such_key", "1"); }) == ErrorKind::config);
  CHECK(kind_of([&] { apply_kv(c, "episode_k", "12x"); }) == ErrorKind::config);
  CHECK(kind_of([&] { apply_kv(c, "loss_alpha", "abc"); }) == ErrorKind::config);
  CHECK(kind_of([&] { apply_kv(c, "loss_alpha", "inf"); }) == ErrorKind::config);
  CHECK(kind_of([&] { apply_kv(c, "eval_single_domain", "yes"); }) == ErrorKind::config);
}

TEST_CASE("config files allow comments and blank lines") {
  std::filesystem::create_directories("scratch_cfg");
  {
    std::ofstream f("scratch_cfg/run.cfg", std::ios::binary);
    f << "# run settings\n"
      << "\n"
      << "episode_k = 24\r\n"
      << "  loss_beta=0.5\n"
      << "out_dir=scratch_cfg/out\n";
  }
  RunConfig c;
  load_config_file(c, "scratch_cfg/run.cfg");
  CHECK(c.episode_k == 24);
  CHECK(c.loss_beta == 0.5);
  CHECK(c.out_dir == "scratch_cfg/out");

  {
    std::ofstream f("scratch_cfg/bad.cfg", std::ios::binary);
    f << "episode_k=8\n"
      << "this line has no equals\n";
  }
  CHECK(kind_of([&] { load_config_file(c, "scratch_cfg/bad.cfg"); }) == ErrorKind::config);
  CHECK(kind_of([&] { load_config_file(c, "scratch_cfg/nope.cfg"); }) == ErrorKind::config);
  std::filesystem::remove_all("scratch_cfg");
}

TEST_CASE("validate rejects out-of-range settings") {
  auto broken = [](const std::function<void(RunConfig&)>& mutate) {
    RunConfig c;
    mutate(c);
    return kind_of([&] { validate(c); });
  };
  CHECK(broken([](RunConfig& c) { c.threads = 0; }) == ErrorKind::config);
  CHECK(broken([](RunConfig& c) { c.bench_hard_group_size = 5; }) == ErrorKind::config);
  CHECK(broken([](RunConfig& c) { c.bench_attr_vocab = 10; }) == ErrorKind::config);
  CHECK(broken([](RunConfig& c) { c.bench_noise_sigma = -0.1; }) == ErrorKind::config);
  CHECK(broken([](RunConfig& c) { c.enc_nonlinearity = "gelu"; }) == ErrorKind::config);
  CHECK(broken([](RunConfig& c) { c.train_batch = 1; }) == ErrorKind::config);
  CHECK(broken([](RunConfig& c) { c.loss_tau = 0; }) == ErrorKind::config);
  CHECK(broken([](RunConfig& c) { c.loss_alpha = c.loss_beta = 0; }) == ErrorKind::config);
  CHECK(broken([](RunConfig& c) { c.lora_rank = 0; }) == ErrorKind::config);
  CHECK(broken([](RunConfig& c) { c.opt_beta1 = 1.0; }) == ErrorKind::config);
  CHECK(broken([](RunConfig& c) { c.adapt_mode = "frozen"; }) == ErrorKind::config);
  CHECK(broken([](RunConfig& c) { c.eval_methods = "ZS+best"; }) == ErrorKind::config);
  CHECK(broken([](RunConfig& c) { c.ablate_ks = "8,0"; }) == ErrorKind::config);
  CHECK(broken([](RunConfig& c) { c.storage_bytes_per_token = 0; }) == ErrorKind::config);

  // Alternate spellings and separators for the method list are fine.
  RunConfig ok;
  ok.eval_methods = "zs, efsa";
  validate(ok);
  ok.eval_methods = "zero-shot";
  validate(ok);
}

TEST_CASE("every key serializes, sorted, and round trips through apply_kv") {
  std::vector<std::string> keys = config_keys();
  CHECK(keys.size() == 58);
  CHECK(std::is_sorted(keys.begin(), keys.end()));

  RunConfig c;
  c.episode_k = 21;
  c.loss_alpha = 0.125;
  c.out_dir = "elsewhere";
  c.eval_export_episodes = true;
  std::string text = serialize(c);

  std::size_t lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  CHECK(lines == keys.size());
  for (const std::string& k : keys)
    CHECK(text.find(k + "=") != std::string::npos);

  // Feed the serialized form back in; the result must serialize identically.
  RunConfig back;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    std::string line = text.substr(start, nl - start);
    std::size_t eq = line.find('=');
    apply_kv(back, line.substr(0, eq), line.substr(eq + 1));
    start = nl + 1;
  }
  CHECK(serialize(back) == text);
  CHECK(config_digest(back) == config_digest(c));
}

TEST_CASE("digest is stable and sensitive") {
  RunConfig a;
  RunConfig b;
  CHECK(config_digest(a) == config_digest(b));
  CHECK(config_digest(a).size() == 16);
  for (char ch : config_digest(a)) CHECK(std::isxdigit(static_cast<unsigned char>(ch)));
  b.episode_k = 17;
  CHECK(config_digest(a) != config_digest(b));
}

TEST_CASE("parse_int_list") {
  std::vector<std::int64_t> v = parse_int_list("8,16,32", "ks");
  CHECK(v == std::vector<std::int64_t>{8, 16, 32});
  CHECK(parse_int_list(" 4 , 2 ", "ks") == std::vector<std::int64_t>{4, 2});
  CHECK(parse_int_list("5", "ks") == std::vector<std::int64_t>{5});
  CHECK(kind_of([] { parse_int_list("8,,16", "ks"); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_int_list("8,x", "ks"); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_int_list("", "ks"); }) == ErrorKind::config);
}
