// Command-line front end; all work goes through the public C API.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "efsa/efsa.h"

namespace {

struct EngineDeleter {
  void operator()(efsa_engine* e) const { efsa_destroy(e); }
};

using EnginePtr = std::unique_ptr<efsa_engine, EngineDeleter>;

int report(efsa_engine* engine, efsa_status status) {
  if (status != EFSA_OK) std::fprintf(stderr, "error: %s\n", efsa_last_error(engine));
  return static_cast<int>(status);
}

std::string get_setting(efsa_engine* engine, const char* key) {
  char buf[512] = {0};
  efsa_get(engine, key, buf, sizeof(buf));
  return buf;
}

int apply_settings(efsa_engine* engine, const std::string& config_path, bool seed_set,
                   std::uint64_t seed, const std::string& out_dir, int threads,
                   const std::vector<std::string>& sets) {
  if (!config_path.empty()) {
    efsa_status st = efsa_load_config(engine, config_path.c_str());
    if (st != EFSA_OK) return report(engine, st);
  }
  if (seed_set) {
    std::string s = std::to_string(seed);
    for (const char* key : {"bench_seed", "train_seed", "episode_seed", "ft_seed"}) {
      efsa_status st = efsa_set(engine, key, s.c_str());
      if (st != EFSA_OK) return report(engine, st);
    }
  }
  if (!out_dir.empty()) {
    efsa_status st = efsa_set(engine, "out_dir", out_dir.c_str());
    if (st != EFSA_OK) return report(engine, st);
  }
  if (threads > 0) {
    efsa_status st = efsa_set(engine, "threads", std::to_string(threads).c_str());
    if (st != EFSA_OK) return report(engine, st);
  }
  for (const std::string& kv : sets) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got \"%s\"\n", kv.c_str());
      return static_cast<int>(EFSA_ERR_CONFIG);
    }
    efsa_status st =
        efsa_set(engine, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (st != EFSA_OK) return report(engine, st);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Episodic few-shot retrieval engine"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;

  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--out-dir", out_dir, "artifact directory (overrides out_dir)");
  app.add_option("--set", sets, "override one key, as key=value")->take_all();
  app.add_option("--seed", seed, "sets bench_seed, train_seed, episode_seed and ft_seed")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_option("--threads", threads, "episode parallelism cap");

  auto* cmd_gen = app.add_subcommand("gen", "generate the synthetic benchmark");
  auto* cmd_train = app.add_subcommand("train-base", "train the base encoder towers");
  auto* cmd_index = app.add_subcommand("index", "encode and store the retrieval pool");
  auto* cmd_eval = app.add_subcommand("eval", "run the retrieval suite and write reports");
  auto* cmd_ablate = app.add_subcommand("ablate", "run one ablation sweep");
  std::string which;
  cmd_ablate->add_option("which", which, "one of: topk, epochs, loss, lora")->required();
  auto* cmd_storage = app.add_subcommand("report-storage", "print storage overhead");
  for (auto* sub : {cmd_gen, cmd_train, cmd_index, cmd_eval, cmd_ablate, cmd_storage})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(EFSA_ERR_CONFIG);
  }

  EnginePtr engine(efsa_create());
  if (!engine) {
    std::fprintf(stderr, "error: could not create engine\n");
    return static_cast<int>(EFSA_ERR_RUNTIME);
  }

  int rc = apply_settings(engine.get(), config_path, seed_set, seed, out_dir, threads, sets);
  if (rc != 0) return rc;

  std::string resolved_out = get_setting(engine.get(), "out_dir");

  if (cmd_gen->parsed()) {
    char digest[64] = {0};
    efsa_status st = efsa_gen(engine.get(), digest, sizeof(digest));
    if (st != EFSA_OK) return report(engine.get(), st);
    std::printf("wrote %s/features.bin\n", resolved_out.c_str());
    std::printf("wrote %s/manifest.tsv\n", resolved_out.c_str());
    std::printf("wrote %s/queries.tsv\n", resolved_out.c_str());
    std::printf("digest=%s\n", digest);
    return 0;
  }
  if (cmd_train->parsed()) {
    efsa_status st = efsa_train_base(engine.get());
    if (st != EFSA_OK) return report(engine.get(), st);
    std::printf("wrote %s/vision.enc\n", resolved_out.c_str());
    std::printf("wrote %s/text.enc\n", resolved_out.c_str());
    return 0;
  }
  if (cmd_index->parsed()) {
    efsa_status st = efsa_index(engine.get());
    if (st != EFSA_OK) return report(engine.get(), st);
    std::printf("wrote %s/pool.bin\n", resolved_out.c_str());
    return 0;
  }
  if (cmd_eval->parsed()) {
    efsa_status st = efsa_eval(engine.get());
    if (st != EFSA_OK) return report(engine.get(), st);
    std::printf("wrote %s/reports/report_multi.csv\n", resolved_out.c_str());
    if (get_setting(engine.get(), "eval_single_domain") == "true")
      std::printf("wrote %s/reports/report_single.csv\n", resolved_out.c_str());
    return 0;
  }
  if (cmd_ablate->parsed()) {
    efsa_status st = efsa_ablate(engine.get(), which.c_str());
    if (st != EFSA_OK) return report(engine.get(), st);
    std::printf("wrote %s/reports/ablate_%s.csv\n", resolved_out.c_str(), which.c_str());
    return 0;
  }
  if (cmd_storage->parsed()) {
    char text[1024] = {0};
    efsa_status st = efsa_report_storage(engine.get(), nullptr, text, sizeof(text));
    if (st != EFSA_OK) return report(engine.get(), st);
    std::printf("%s", text);
    return 0;
  }
  return static_cast<int>(EFSA_ERR_CONFIG);
}
