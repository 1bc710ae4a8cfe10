#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lpf {

/// Base of every error raised by the harness.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class UnsupportedControl : public Error {
 public:
  using Error::Error;
};

class UnmappableTopic : public Error {
 public:
  using Error::Error;
};

class RenderError : public Error {
 public:
  using Error::Error;
};

/// Backend answered, but the answer violates the wire contract.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Backend could not be reached and nothing was cached.
class TransportError : public Error {
 public:
  using Error::Error;
};

class EmptySequence : public Error {
 public:
  using Error::Error;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

class EmissionError : public Error {
 public:
  using Error::Error;
};

/// Replay lookups that failed. Carries every missing key so a run can fail
/// fast with the full list instead of one key at a time.
class MissingRecord : public Error {
 public:
  explicit MissingRecord(std::vector<std::string> keys)
      : Error(describe(keys)), keys_(std::move(keys)) {}

  const std::vector<std::string>& keys() const noexcept { return keys_; }

 private:
  static std::string describe(const std::vector<std::string>& keys) {
    std::string msg = "missing replay record(s): " + std::to_string(keys.size());
    for (std::size_t i = 0; i < keys.size() && i < 20; ++i) msg += "\n  " + keys[i];
    if (keys.size() > 20) msg += "\n  ...";
    return msg;
  }
  std::vector<std::string> keys_;
};

}  // namespace lpf
