#pragma once

#include <stdexcept>
#include <string>

namespace ovmm {

// Rejected or inconsistent caller input (dimension mismatches, bad poses...).
class InputError : public std::runtime_error {
public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed files, missing map layers, broken manifests.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Remote semantic backend failed after retries.
class BackendError : public std::runtime_error {
public:
  explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ovmm
