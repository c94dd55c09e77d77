#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace factmatch {

using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::year_month_day;
using Clock = std::function<Timestamp()>;

/// RFC 3339 date-time ("2022-02-24T08:15:00Z", "2022-02-24T10:15:00.123+02:00").
/// Fractional seconds are truncated. Returns nullopt on malformed input.
std::optional<Timestamp> parse_rfc3339(std::string_view text);

/// Always UTC with a trailing 'Z', second precision.
std::string format_rfc3339(Timestamp ts);

/// "YYYY-MM-DD"; nullopt when malformed or not a real calendar day.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date d);

/// UTC calendar day containing `ts`.
Date utc_date(Timestamp ts);

Timestamp system_now();

}  // namespace factmatch
