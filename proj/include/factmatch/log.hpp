#pragma once

#include <functional>
#include <string_view>

namespace factmatch {

using WarningSink = std::function<void(std::string_view)>;

/// Default sink writes "warning: ..." to std::clog. Thread-safe.
void log_warning(std::string_view message);
/// Returns the previous sink. An empty function silences warnings.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace factmatch
