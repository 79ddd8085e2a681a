#pragma once

#include <chrono>
#include <functional>
#include <string>

namespace portraitgen {

using TimePoint = std::chrono::system_clock::time_point;
/// Injectable time source; manifests and job records read time only through it.
using Clock = std::function<TimePoint()>;

Clock system_clock();
/// Always returns `at`; makes manifests byte-stable in tests.
Clock fixed_clock(TimePoint at);
/// UTC, millisecond precision: 2023-09-01T12:00:00.000Z
std::string iso8601(TimePoint t);
TimePoint parse_iso8601(const std::string& text);

}  // namespace portraitgen
