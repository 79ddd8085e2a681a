#include "portraitgen/clock.h"

#include <cstdio>
#include <ctime>

#include "portraitgen/error.h"

namespace portraitgen {

Clock system_clock() {
    return [] { return std::chrono::system_clock::now(); };
}

Clock fixed_clock(TimePoint at) {
    return [at] { return at; };
}

std::string iso8601(TimePoint t) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
    const auto secs = static_cast<std::time_t>(ms >= 0 ? ms / 1000 : (ms - 999) / 1000);
    const int frac = static_cast<int>(ms - static_cast<long long>(secs) * 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
    return buf;
}

TimePoint parse_iso8601(const std::string& text) {
    std::tm tm{};
    int ms = 0;
    const int n = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                              &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &ms);
    if (n != 7) {
        throw Error(ErrorCode::invalid_input, "bad timestamp: " + text);
    }
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    const auto secs = timegm(&tm);
    return TimePoint(std::chrono::milliseconds(static_cast<long long>(secs) * 1000 + ms));
}

}  // namespace portraitgen
