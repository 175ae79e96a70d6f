#pragma once

#include <stdexcept>
#include <string>

namespace posecast {

// Base of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class ProjectionError : public Error {
 public:
  ProjectionError(std::size_t joint, float depth, const std::string& joint_name = {})
      : Error("projection failed: joint " + std::to_string(joint) +
              (joint_name.empty() ? std::string() : " (" + joint_name + ")") +
              " has camera depth " + std::to_string(depth) + " mm"),
        joint_(joint),
        depth_(depth) {}

  std::size_t joint() const { return joint_; }
  float depth() const { return depth_; }

 private:
  std::size_t joint_;
  float depth_;
};

class LossUndefinedError : public Error {
 public:
  using Error::Error;
};

// Numerical failure during training (NaN/Inf loss or gradient).
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::string last_good_checkpoint = {})
      : Error(what), last_good_(std::move(last_good_checkpoint)) {}
  const std::string& last_good_checkpoint() const { return last_good_; }

 private:
  std::string last_good_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Artifacts that parse but do not belong together (layout/version mismatch).
class VersionError : public Error {
 public:
  using Error::Error;
};

// Degenerate synthetic grammar.
class SpecError : public Error {
 public:
  using Error::Error;
};

}  // namespace posecast
