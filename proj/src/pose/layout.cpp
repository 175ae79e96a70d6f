#include "posecast/pose/layout.hpp"

#include <algorithm>
#include <numeric>

#include "posecast/errors.hpp"

namespace posecast::pose {

JointLayout JointLayout::upper_body() {
  return JointLayout({"head", "neck", "right_shoulder", "right_elbow", "right_hand", "left_shoulder", "left_elbow",
                      "left_hand", "hip"},
                     {{kNeck, kHead},
                      {kNeck, kRightShoulder},
                      {kRightShoulder, kRightElbow},
                      {kRightElbow, kRightHand},
                      {kNeck, kLeftShoulder},
                      {kLeftShoulder, kLeftElbow},
                      {kLeftElbow, kLeftHand},
                      {kNeck, kHip}},
                     {{kRightShoulder, kLeftShoulder}, {kRightElbow, kLeftElbow}, {kRightHand, kLeftHand}}, kNeck);
}

JointLayout::JointLayout(std::vector<std::string> names, std::vector<Bone> bones,
                         std::vector<std::pair<std::size_t, std::size_t>> mirror_pairs, std::size_t root)
    : names_(std::move(names)), bones_(std::move(bones)), mirror_pairs_(std::move(mirror_pairs)), root_(root) {
  const std::size_t n = names_.size();
  if (n == 0) throw ValidationError("joint layout has no joints");
  if (root_ >= n) throw ValidationError("joint layout root index out of range");
  if (bones_.size() != n - 1) {
    throw ValidationError("joint layout needs " + std::to_string(n - 1) + " bones for a tree, got " +
                          std::to_string(bones_.size()));
  }
  std::vector<int> parent_count(n, 0);
  for (const auto& b : bones_) {
    if (b.parent >= n || b.child >= n || b.parent == b.child) throw ValidationError("joint layout has an invalid bone");
    if (b.child == root_) throw ValidationError("joint layout root cannot be a bone child");
    if (++parent_count[b.child] > 1) throw ValidationError("joint " + names_[b.child] + " has two parents");
  }
  // every joint reachable from the root
  std::vector<bool> seen(n, false);
  seen[root_] = true;
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& b : bones_) {
      if (seen[b.parent] && !seen[b.child]) {
        seen[b.child] = true;
        grew = true;
      }
    }
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool s) { return s; })) {
    throw ValidationError("joint layout bones do not form a tree rooted at " + names_[root_]);
  }
  mirror_.resize(n);
  std::iota(mirror_.begin(), mirror_.end(), std::size_t{0});
  for (const auto& [a, b] : mirror_pairs_) {
    if (a >= n || b >= n || a == b) throw ValidationError("invalid mirror pair");
    if (mirror_[a] != a || mirror_[b] != b) throw ValidationError("joint listed in two mirror pairs");
    mirror_[a] = b;
    mirror_[b] = a;
  }
}

std::vector<std::pair<std::size_t, std::size_t>> JointLayout::mirrored_bones() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < bones_.size(); ++i) {
    const Bone m{mirror(bones_[i].parent), mirror(bones_[i].child)};
    if (m == bones_[i]) continue;
    for (std::size_t j = i + 1; j < bones_.size(); ++j) {
      if (bones_[j] == m) out.emplace_back(i, j);
    }
  }
  return out;
}

std::size_t JointLayout::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ValidationError("unknown joint name " + name);
  return static_cast<std::size_t>(it - names_.begin());
}

}  // namespace posecast::pose
