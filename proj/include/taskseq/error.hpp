#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace taskseq {

// Coarse error classes; the CLI maps them onto exit codes 2/3/4.
enum class ErrorCategory { Config, Data, Numerical };

int exit_code(ErrorCategory category);

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, std::string kind, const std::string& message,
        nlohmann::json details = nlohmann::json::object());

  ErrorCategory category() const { return category_; }
  const std::string& kind() const { return kind_; }
  const nlohmann::json& details() const { return details_; }

  // {"error": kind, "category": ..., "message": ..., ...details}
  nlohmann::json to_json() const;

private:
  ErrorCategory category_;
  std::string kind_;
  nlohmann::json details_;
};

inline Error config_error(std::string kind, const std::string& message,
                          nlohmann::json details = nlohmann::json::object()) {
  return Error(ErrorCategory::Config, std::move(kind), message, std::move(details));
}

inline Error data_error(std::string kind, const std::string& message,
                        nlohmann::json details = nlohmann::json::object()) {
  return Error(ErrorCategory::Data, std::move(kind), message, std::move(details));
}

inline Error numerical_error(std::string kind, const std::string& message,
                             nlohmann::json details = nlohmann::json::object()) {
  return Error(ErrorCategory::Numerical, std::move(kind), message, std::move(details));
}

}  // namespace taskseq
