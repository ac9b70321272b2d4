#pragma once

#include <stdexcept>
#include <string>

namespace scenekeeper {

// Every failure in the library carries a short machine-readable code
// ("degenerate-box", "time-regression", ...) plus optional detail text.
class Error : public std::runtime_error {
 public:
  explicit Error(std::string code, const std::string& detail = {})
      : std::runtime_error(detail.empty() ? code : code + ": " + detail),
        code_(std::move(code)),
        detail_(detail) {}

  const std::string& code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string code_;
  std::string detail_;
};

}  // namespace scenekeeper
