#include "posecast/nn/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "posecast/errors.hpp"

namespace posecast::nn {
namespace {

constexpr std::array<char, 4> kMagic = {'C', 'P', 'F', '1'};

template <typename T>
void put(std::ostream& os, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) os.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

void put_f32(std::ostream& os, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, sizeof bits);
  put(os, bits);
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = is.get();
    if (c == EOF) throw FormatError(path + ": truncated checkpoint");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return static_cast<T>(v);
}

float get_f32(std::istream& is, const std::string& path) {
  const auto bits = get<std::uint32_t>(is, path);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

std::string get_bytes(std::istream& is, std::size_t n, const std::string& path) {
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) throw FormatError(path + ": truncated checkpoint");
  return s;
}

}  // namespace

const Tensor* CheckpointData::find(const std::string& name) const {
  for (const auto& r : records)
    if (r.name == name) return &r.tensor;
  return nullptr;
}

void write_checkpoint(const std::string& path, const std::string& metadata, const std::vector<NamedTensor>& records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, records.size());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(metadata.size()));
  os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  for (const auto& r : records) {
    if (r.name.size() > 0xffff) throw FormatError("parameter name too long: " + r.name.substr(0, 32));
    put<std::uint16_t>(os, static_cast<std::uint16_t>(r.name.size()));
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(r.tensor.rank()));
    for (auto d : r.tensor.shape()) put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    for (float v : r.tensor.data()) put_f32(os, v);
  }
  if (!os) throw FormatError("write failed: " + path);
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path);
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw FormatError(path + ": not a CPF1 checkpoint");
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw VersionError(path + ": checkpoint version " + std::to_string(version) + ", expected " +
                       std::to_string(kCheckpointVersion));
  }
  const auto count = get<std::uint64_t>(is, path);
  CheckpointData data;
  data.metadata = get_bytes(is, get<std::uint32_t>(is, path), path);
  data.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor r;
    r.name = get_bytes(is, get<std::uint16_t>(is, path), path);
    const auto rank = get<std::uint8_t>(is, path);
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint32_t>(is, path);
    Tensor t(shape);
    for (auto& v : t.data()) v = get_f32(is, path);
    r.tensor = std::move(t);
    data.records.push_back(std::move(r));
  }
  return data;
}

void save_parameters(const std::string& path, const std::string& metadata, const std::vector<Parameter*>& params) {
  std::vector<NamedTensor> records;
  records.reserve(params.size());
  for (const auto* p : params) records.push_back({p->name, p->value});
  write_checkpoint(path, metadata, records);
}

void assign_parameters(const CheckpointData& data, const std::vector<Parameter*>& params) {
  for (auto* p : params) {
    const Tensor* t = data.find(p->name);
    if (!t) throw VersionError("checkpoint lacks parameter " + p->name);
    if (t->shape() != p->value.shape()) {
      throw VersionError("checkpoint parameter " + p->name + " has shape " + shape_string(t->shape()) +
                         ", model expects " + shape_string(p->value.shape()));
    }
    p->value = *t;
  }
}

}  // namespace posecast::nn
