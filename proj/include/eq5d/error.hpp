// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace eq5d {

/// Base of every error raised by the pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A backend, tokenizer or checkpoint that the configuration names cannot be
/// resolved or does not match its consumer.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Corpus file unreadable or a record that cannot be interpreted.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition or type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

}  // namespace eq5d
