#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "posecast/nn/tape.hpp"

namespace posecast::nn {

// Binary little-endian layout:
//   "CPF1" | version u32 | record count u64 | metadata length u32 | metadata (UTF-8 JSON)
//   per record: name length u16 | name | rank u8 | dims u32 x rank | f32 x prod(dims)
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct CheckpointData {
  std::string metadata;
  std::vector<NamedTensor> records;

  const Tensor* find(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const std::string& metadata, const std::vector<NamedTensor>& records);
CheckpointData read_checkpoint(const std::string& path);

void save_parameters(const std::string& path, const std::string& metadata, const std::vector<Parameter*>& params);
// Copies values by name. Missing names or shape differences raise VersionError.
void assign_parameters(const CheckpointData& data, const std::vector<Parameter*>& params);

}  // namespace posecast::nn
