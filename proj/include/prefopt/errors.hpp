#pragma once

#include <stdexcept>
#include <string>

namespace prefopt {

// Config/document failed schema validation (CLI exit code 2).
struct schema_error : std::runtime_error {
  explicit schema_error(const std::string& what) : std::runtime_error(what) {}
};

// Exact-enumeration workload exceeds the configured budget (CLI exit code 4).
// Enumeration is never silently replaced by sampling.
struct budget_error : std::runtime_error {
  explicit budget_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace prefopt
