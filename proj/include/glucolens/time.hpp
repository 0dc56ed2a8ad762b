#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace glucolens {

// Seconds since the Unix epoch, always UTC. All grid math happens in
// integer seconds; local-time rendering is a presentation concern.
struct Timestamp {
    std::int64_t seconds_utc = 0;

    friend auto operator<=>(const Timestamp&, const Timestamp&) = default;

    Timestamp operator+(std::int64_t s) const { return Timestamp{seconds_utc + s}; }
    Timestamp operator-(std::int64_t s) const { return Timestamp{seconds_utc - s}; }
    std::int64_t operator-(Timestamp other) const { return seconds_utc - other.seconds_utc; }
};

// Accepts "2024-01-01T12:34:56Z" (the trailing Z is optional) or plain
// integer epoch seconds. Throws std::invalid_argument on anything else.
Timestamp parse_timestamp(const std::string& text);

// True when the text looks like a bare integer (epoch-seconds form).
bool is_epoch_seconds(const std::string& text);

std::string to_iso8601(Timestamp t);

}  // namespace glucolens
