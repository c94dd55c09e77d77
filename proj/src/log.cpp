#include "factmatch/log.hpp"

#include <iostream>
#include <mutex>

namespace factmatch {

namespace {

std::mutex& sink_mutex()
{
    static std::mutex m;
    return m;
}

WarningSink& sink()
{
    static WarningSink s = [](std::string_view msg) { std::clog << "warning: " << msg << '\n'; };
    return s;
}

}  // namespace

void log_warning(std::string_view message)
{
    std::lock_guard lock(sink_mutex());
    if (sink()) {
        sink()(message);
    }
}

WarningSink set_warning_sink(WarningSink s)
{
    std::lock_guard lock(sink_mutex());
    auto previous = std::move(sink());
    sink() = std::move(s);
    return previous;
}

}  // namespace factmatch
