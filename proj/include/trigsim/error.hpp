// Copyright 2026 The trigsim Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace trigsim {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller-supplied argument violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Input data (files, databases, datasets) is malformed or unusable.
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents. Carries the 1-based line or 0-based record index
// when one is known.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::optional<std::size_t> location = std::nullopt)
      : DataError(what), location_(location) {}

  std::optional<std::size_t> location() const noexcept { return location_; }

 private:
  std::optional<std::size_t> location_;
};

class IoError : public DataError {
 public:
  IoError(const std::string& what, std::filesystem::path path)
      : DataError(what + ": " + path.string()), path_(std::move(path)) {}

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

// A computed quantity left its mathematically guaranteed range.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace trigsim
