#pragma once

#include <stdexcept>
#include <string>

namespace epibench {

// Bad arguments or violated preconditions (dimension mismatch, invalid range...).
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed external data (IDX files, CSV, config).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training diverged (non-finite loss or parameters).
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& msg, int epoch, int member = -1)
      : std::runtime_error(msg), epoch(epoch), member(member) {}
  int epoch;
  int member;  // -1 when not attributable to a specific ensemble member
};

}  // namespace epibench
