#pragma once

#include <stdexcept>
#include <string>

namespace xrf {

/// Failure of a numerical stage; `stage` names the step that failed.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace xrf
