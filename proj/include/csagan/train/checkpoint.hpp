#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "csagan/train/trainer.hpp"

namespace csagan {

constexpr uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamBlob {
  int64_t t = 0;
  std::vector<double> m, v;
};

// Parsed checkpoint contents, independent of any live model.
struct CheckpointData {
  std::string config_text;
  int stage = 1;
  int epoch = 0;
  int64_t batch_in_epoch = 0;
  int64_t step = 0;
  uint64_t seed = 0;
  bool halted = false;
  std::map<std::string, std::vector<double>> parameters;
  std::map<std::string, std::vector<double>> spectral;
  std::map<std::string, AdamBlob> adam_g, adam_d;
};

// Layout: "CSCK", u32 version, payload, u64 FNV-1a of everything before it.
// Numbers are little-endian; doubles are stored as raw IEEE-754 bits.
std::string encode_checkpoint(TrainingState& state);
CheckpointData decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, TrainingState& state);
CheckpointData read_checkpoint(const std::filesystem::path& path);

// Copies blobs into a state built from the same configuration. Every name
// and size is checked before anything is modified.
void apply_checkpoint(const CheckpointData& data, TrainingState& state);

}  // namespace csagan
