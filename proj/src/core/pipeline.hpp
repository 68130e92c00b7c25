#pragma once

#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/pool.hpp"

namespace efsa {

// Artifact layout under out_dir.
struct Artifacts {
  std::string root;
  explicit Artifacts(std::string out_dir) : root(std::move(out_dir)) {}

  std::string features() const { return root + "/features.bin"; }
  std::string manifest() const { return root + "/manifest.tsv"; }
  std::string queries() const { return root + "/queries.tsv"; }
  std::string vision_encoder() const { return root + "/vision.enc"; }
  std::string text_encoder() const { return root + "/text.enc"; }
  std::string pool() const { return root + "/pool.bin"; }
  std::string reports() const { return root + "/reports"; }
  std::string resolved_config(const std::string& command) const {
    return root + "/resolved_" + command + ".cfg";
  }
};

struct GenOutcome {
  std::string digest;  // content digest over the emitted files
  std::vector<std::string> files;
};

GenOutcome cmd_gen(const RunConfig& cfg);
void cmd_train_base(const RunConfig& cfg);
void cmd_index(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_ablate(const RunConfig& cfg, const std::string& which);

// Storage-overhead arithmetic from the config's storage_* keys; returns the
// printable report text.
std::string cmd_report_storage(const RunConfig& cfg);

}  // namespace efsa
