#ifndef EFSA_EFSA_H
#define EFSA_EFSA_H

/* C interface to the episodic retrieval engine. All work runs behind an
 * opaque engine handle configured through key=value settings; functions
 * return status codes and never throw across the boundary. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum efsa_status {
  EFSA_OK = 0,
  EFSA_ERR_CONFIG = 2,
  EFSA_ERR_MISSING_ARTIFACT = 3,
  EFSA_ERR_RUNTIME = 4
} efsa_status;

typedef struct efsa_engine efsa_engine;

/* Engine with built-in default settings; NULL on allocation failure. */
efsa_engine* efsa_create(void);
void efsa_destroy(efsa_engine* engine);

/* Message for the most recent failed call on this engine; empty when the
 * last call succeeded. Owned by the engine, valid until the next call. */
const char* efsa_last_error(const efsa_engine* engine);

/* Applies key=value lines from a UTF-8 file; # starts a comment line. */
efsa_status efsa_load_config(efsa_engine* engine, const char* path);

/* Sets one key; unknown keys and malformed values are config errors. */
efsa_status efsa_set(efsa_engine* engine, const char* key, const char* value);

/* Reads one resolved setting back as text. */
efsa_status efsa_get(efsa_engine* engine, const char* key, char* out, size_t out_size);

/* Stable digest of the fully resolved settings. */
efsa_status efsa_config_digest(efsa_engine* engine, char* out, size_t out_size);

/* Generates the synthetic benchmark under out_dir and reports a content
 * digest over the emitted files. */
efsa_status efsa_gen(efsa_engine* engine, char* digest_out, size_t digest_size);

/* Trains the base encoder towers from generated artifacts. */
efsa_status efsa_train_base(efsa_engine* engine);

/* Encodes the pool with the trained vision tower and writes the store. */
efsa_status efsa_index(efsa_engine* engine);

/* Runs the retrieval suite and writes CSV and key=value reports. */
efsa_status efsa_eval(efsa_engine* engine);

/* which: "topk", "epochs", "loss" or "lora". */
efsa_status efsa_ablate(efsa_engine* engine, const char* which);

typedef struct efsa_storage_info {
  double embedding_bytes_per_item;
  double caption_bytes_per_item;
  double total_embedding_bytes;
  double total_caption_bytes;
  double relative_overhead;
} efsa_storage_info;

/* Storage-overhead arithmetic from the storage_* settings. info and
 * text_out may each be NULL when not wanted. */
efsa_status efsa_report_storage(efsa_engine* engine, efsa_storage_info* info,
                                char* text_out, size_t text_size);

#ifdef __cplusplus
}
#endif

#endif /* EFSA_EFSA_H */
