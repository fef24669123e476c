#pragma once

#include <chrono>
#include <ctime>
#include <functional>
#include <string>

namespace asr {

/// Wall-clock source returning ISO-8601 UTC timestamps; injectable for tests.
using Clock = std::function<std::string()>;

inline std::string utc_now()
{
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace asr
