#include "posecast/data/posedb.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "posecast/errors.hpp"

namespace posecast::data {

namespace {

constexpr char kMagic[4] = {'P', '3', 'D', 'B'};

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f32(std::ofstream& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

std::vector<pose::Skeleton3D> read_pose_db(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[4];
  unsigned char count_b[8], joints_b;
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path.string() + ": not a P3DB file");
  if (!in.read(reinterpret_cast<char*>(count_b), 8) || !in.read(reinterpret_cast<char*>(&joints_b), 1)) {
    throw FormatError(path.string() + ": truncated header");
  }
  std::uint64_t count = 0;
  for (int i = 0; i < 8; ++i) count |= static_cast<std::uint64_t>(count_b[i]) << (8 * i);
  const std::size_t joints = joints_b;
  const auto remaining = std::filesystem::file_size(path) - 13;
  if (joints == 0 || remaining != count * joints * 12) {
    throw FormatError(path.string() + ": size does not match " + std::to_string(count) + " poses of " +
                      std::to_string(joints) + " joints");
  }
  std::vector<unsigned char> raw(remaining);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  std::vector<pose::Skeleton3D> poses(count, pose::Skeleton3D(joints));
  std::size_t off = 0;
  for (auto& p : poses) {
    for (auto& j : p.joints) {
      for (float& c : j) {
        const std::uint32_t u = raw[off] | (raw[off + 1] << 8) | (raw[off + 2] << 16) |
                                (static_cast<std::uint32_t>(raw[off + 3]) << 24);
        std::memcpy(&c, &u, 4);
        off += 4;
      }
    }
  }
  return poses;
}

void write_pose_db(const std::filesystem::path& path, const std::vector<pose::Skeleton3D>& poses) {
  const std::size_t joints = poses.empty() ? pose::kNumJoints : poses.front().size();
  if (joints == 0 || joints > 255) throw ContractError("write_pose_db: joint count must be in [1, 255]");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(kMagic, 4);
  put_u64(out, poses.size());
  const unsigned char j8 = static_cast<unsigned char>(joints);
  out.write(reinterpret_cast<const char*>(&j8), 1);
  for (const auto& p : poses) {
    if (p.size() != joints) throw ContractError("write_pose_db: mixed joint counts");
    for (const auto& j : p.joints)
      for (float c : j) put_f32(out, c);
  }
}

std::vector<pose::Skeleton3D> prepare_pose_db(std::vector<pose::Skeleton3D> poses, const pose::JointLayout& layout) {
  for (std::size_t i = 0; i < poses.size(); ++i) {
    auto& p = poses[i];
    if (p.size() != layout.size()) {
      throw ValidationError("pose database entry " + std::to_string(i) + " has " + std::to_string(p.size()) +
                            " joints, layout has " + std::to_string(layout.size()));
    }
    for (const auto& j : p.joints)
      for (float c : j)
        if (!std::isfinite(c)) throw ValidationError("pose database entry " + std::to_string(i) + " is not finite");
    p = pose::center_at_neck(p, layout.root());
  }
  return poses;
}

}  // namespace posecast::data
