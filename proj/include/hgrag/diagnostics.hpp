#pragma once

#include <string>
#include <vector>

namespace hgrag {

enum class Severity { kInfo, kWarning, kError };

/// Non-fatal finding attached to an operation's result.
struct Diagnostic {
  Severity severity = Severity::kWarning;
  std::string code;
  std::string message;
  int index = -1;  // fragment/item index when relevant

  bool operator==(const Diagnostic&) const = default;
};

using Diagnostics = std::vector<Diagnostic>;

inline const char* to_string(Severity s) {
  switch (s) {
    case Severity::kInfo: return "info";
    case Severity::kWarning: return "warning";
    case Severity::kError: return "error";
  }
  return "unknown";
}

}  // namespace hgrag
