#pragma once

#include <memory>
#include <string>

#include "dfield/io/config.hpp"
#include "dfield/train/training.hpp"

namespace dfield {

inline constexpr int kCheckpointVersion = 1;

// Binary layout: "DFCK", u32 version, u64 manifest length, manifest JSON,
// then every tensor as little-endian float32 in manifest order. Tensors are
// the parameters ("param/<name>") and the Adam moments ("adam_m/<name>",
// "adam_v/<name>"); the manifest also carries the run config, step, running
// loss means, optimizer step count and the generator state.
struct Checkpoint {
  RunConfig config;
  std::unique_ptr<TrainState> state;
  std::string created;
};

std::string encode_checkpoint(const TrainState& state, const RunConfig& config, const std::string& created);
Checkpoint decode_checkpoint(const std::string& bytes);

// Writes through a temporary file and a rename, so an existing checkpoint at
// `path` is never left half-written.
void save_checkpoint(const std::string& path, const TrainState& state, const RunConfig& config,
                     const std::string& created);
Checkpoint load_checkpoint(const std::string& path);

// Fresh state for `config` at step 0.
std::unique_ptr<TrainState> initial_state(const RunConfig& config);

}  // namespace dfield
