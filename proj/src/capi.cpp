#include "efsa/efsa.h"

#include <cstring>
#include <exception>
#include <string>

#include "core/common.hpp"
#include "core/config.hpp"
#include "core/pipeline.hpp"
#include "core/pool.hpp"

struct efsa_engine {
  efsa::RunConfig cfg;
  std::string last_error;
};

namespace {

void copy_out(char* out, size_t out_size, const std::string& s) {
  if (out == nullptr || out_size == 0) return;
  size_t n = s.size() < out_size - 1 ? s.size() : out_size - 1;
  std::memcpy(out, s.data(), n);
  out[n] = '\0';
}

template <typename Fn>
efsa_status wrap(efsa_engine* engine, Fn&& fn) {
  if (engine == nullptr) return EFSA_ERR_RUNTIME;
  engine->last_error.clear();
  try {
    fn();
    return EFSA_OK;
  } catch (const efsa::Error& e) {
    engine->last_error = e.what();
    switch (e.kind()) {
      case efsa::ErrorKind::config: return EFSA_ERR_CONFIG;
      case efsa::ErrorKind::missing_artifact: return EFSA_ERR_MISSING_ARTIFACT;
      default: return EFSA_ERR_RUNTIME;
    }
  } catch (const std::exception& e) {
    engine->last_error = e.what();
    return EFSA_ERR_RUNTIME;
  } catch (...) {
    engine->last_error = "unknown error";
    return EFSA_ERR_RUNTIME;
  }
}

const char* require(const char* p, const char* what) {
  if (p == nullptr) efsa::fail(efsa::ErrorKind::config, std::string(what) + " is null");
  return p;
}

}  // namespace

extern "C" {

efsa_engine* efsa_create(void) {
  try {
    return new efsa_engine();
  } catch (...) {
    return nullptr;
  }
}

void efsa_destroy(efsa_engine* engine) { delete engine; }

const char* efsa_last_error(const efsa_engine* engine) {
  return engine == nullptr ? "" : engine->last_error.c_str();
}

efsa_status efsa_load_config(efsa_engine* engine, const char* path) {
  return wrap(engine, [&] {
    efsa::load_config_file(engine->cfg, require(path, "config path"));
  });
}

efsa_status efsa_set(efsa_engine* engine, const char* key, const char* value) {
  return wrap(engine, [&] {
    efsa::apply_kv(engine->cfg, require(key, "key"), require(value, "value"));
  });
}

efsa_status efsa_get(efsa_engine* engine, const char* key, char* out, size_t out_size) {
  return wrap(engine, [&] {
    std::string want = require(key, "key");
    std::string serialized = efsa::serialize(engine->cfg);
    size_t pos = 0;
    while (pos < serialized.size()) {
      size_t nl = serialized.find('\n', pos);
      std::string line = serialized.substr(pos, nl - pos);
      size_t eq = line.find('=');
      if (line.compare(0, eq, want) == 0) {
        copy_out(out, out_size, line.substr(eq + 1));
        return;
      }
      pos = nl + 1;
    }
    efsa::fail(efsa::ErrorKind::config, "config: unknown key " + want);
  });
}

efsa_status efsa_config_digest(efsa_engine* engine, char* out, size_t out_size) {
  return wrap(engine, [&] { copy_out(out, out_size, efsa::config_digest(engine->cfg)); });
}

efsa_status efsa_gen(efsa_engine* engine, char* digest_out, size_t digest_size) {
  return wrap(engine, [&] {
    efsa::GenOutcome outcome = efsa::cmd_gen(engine->cfg);
    copy_out(digest_out, digest_size, outcome.digest);
  });
}

efsa_status efsa_train_base(efsa_engine* engine) {
  return wrap(engine, [&] { efsa::cmd_train_base(engine->cfg); });
}

efsa_status efsa_index(efsa_engine* engine) {
  return wrap(engine, [&] { efsa::cmd_index(engine->cfg); });
}

efsa_status efsa_eval(efsa_engine* engine) {
  return wrap(engine, [&] { efsa::cmd_eval(engine->cfg); });
}

efsa_status efsa_ablate(efsa_engine* engine, const char* which) {
  return wrap(engine, [&] { efsa::cmd_ablate(engine->cfg, require(which, "ablation name")); });
}

efsa_status efsa_report_storage(efsa_engine* engine, efsa_storage_info* info, char* text_out,
                                size_t text_size) {
  return wrap(engine, [&] {
    std::string text = efsa::cmd_report_storage(engine->cfg);
    if (info != nullptr) {
      efsa::StorageReport rep = efsa::storage_report(
          static_cast<std::uint64_t>(engine->cfg.storage_pool_size),
          static_cast<std::uint64_t>(engine->cfg.storage_d_e),
          static_cast<std::uint64_t>(engine->cfg.storage_bytes_per_scalar),
          engine->cfg.storage_caption_tokens,
          static_cast<std::uint64_t>(engine->cfg.storage_bytes_per_token));
      info->embedding_bytes_per_item = rep.embedding_bytes_per_item;
      info->caption_bytes_per_item = rep.caption_bytes_per_item;
      info->total_embedding_bytes = rep.total_embedding_bytes;
      info->total_caption_bytes = rep.total_caption_bytes;
      info->relative_overhead = rep.relative_overhead;
    }
    copy_out(text_out, text_size, text);
  });
}

}  // extern "C"
