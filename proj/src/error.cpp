#include "taskseq/error.hpp"

namespace taskseq {

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Numerical: return 4;
  }
  return 1;
}

Error::Error(ErrorCategory category, std::string kind, const std::string& message,
             nlohmann::json details)
    : std::runtime_error(kind + ": " + message),
      category_(category),
      kind_(std::move(kind)),
      details_(std::move(details)) {}

nlohmann::json Error::to_json() const {
  nlohmann::json j = details_.is_object() ? details_ : nlohmann::json::object();
  j["error"] = kind_;
  switch (category_) {
    case ErrorCategory::Config: j["category"] = "config"; break;
    case ErrorCategory::Data: j["category"] = "data"; break;
    case ErrorCategory::Numerical: j["category"] = "numerical"; break;
  }
  j["message"] = what();
  return j;
}

}  // namespace taskseq
