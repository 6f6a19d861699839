#pragma once

#include <stdexcept>
#include <string>

namespace qfx {

// Bad input data or configuration. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A pipeline stage needs an artifact that an earlier stage produces.
class MissingArtifactError : public ValidationError {
 public:
  MissingArtifactError(const std::string& artifact, const std::string& stage)
      : ValidationError("missing artifact '" + artifact + "': run `qfx " + stage + "` first"),
        stage_(stage) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace qfx
