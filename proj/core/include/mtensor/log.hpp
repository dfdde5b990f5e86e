#pragma once

#include <functional>
#include <string_view>

namespace mtensor {

using WarningHandler = std::function<void(std::string_view)>;

/// Installs a process-wide sink for non-fatal diagnostics and returns the
/// previous one. The default writes to stderr. Passing an empty handler
/// silences warnings.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(std::string_view message);

}  // namespace mtensor
