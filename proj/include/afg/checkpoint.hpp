#pragma once

// Checkpoint file:
//   line 1   compact JSON manifest: format, version, model config, vocab,
//            provenance, optimizer step, array table (name, shape, byte
//            offset, count), payload size and CRC-32 of the payload
//   rest     raw little-endian IEEE-754 float64 arrays: parameters, then
//            first moments, then second moments, in manifest order

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "afg/adamw.hpp"
#include "afg/model.hpp"
#include "afg/tokenizer.hpp"

namespace afg {

inline constexpr int kCheckpointVersion = 1;

struct StageRecord {
  std::string stage;
  std::size_t epochs = 0;

  friend bool operator==(const StageRecord&, const StageRecord&) = default;
};

struct Checkpoint {
  ModelConfig config;
  Vocab vocab;
  ModelParams params;
  AdamWState optimizer;
  std::vector<StageRecord> provenance;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Throws CheckpointError on version mismatch, truncation or checksum failure.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Throws CheckpointError unless params has exactly the names and shapes
// init_model(cfg) would produce, and cfg matches the vocabulary size.
void check_compatible(const ModelParams& params, const ModelConfig& cfg);

}  // namespace afg
