#include "glucolens/time.hpp"

#include <cctype>
#include <cstdio>
#include <stdexcept>

namespace glucolens {

namespace {

bool all_digits(const std::string& s, std::size_t from) {
    if (from >= s.size()) return false;
    for (std::size_t i = from; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    // Howard Hinnant's proleptic Gregorian day count.
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

}  // namespace

bool is_epoch_seconds(const std::string& text) {
    if (text.empty()) return false;
    std::size_t start = (text[0] == '-' || text[0] == '+') ? 1 : 0;
    return all_digits(text, start);
}

Timestamp parse_timestamp(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("empty timestamp");
    if (is_epoch_seconds(text)) {
        std::int64_t v = 0;
        try {
            v = std::stoll(text);
        } catch (const std::exception&) {
            throw std::invalid_argument("unparseable epoch seconds: " + text);
        }
        if (v < 0) throw std::invalid_argument("negative timestamp: " + text);
        return Timestamp{v};
    }
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    char sep = 0, zone = 0;
    int n = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%c", &year, &month, &day,
                        &sep, &hour, &minute, &second, &zone);
    if (n < 7 || (sep != 'T' && sep != ' ') || (n == 8 && zone != 'Z'))
        throw std::invalid_argument("unparseable timestamp: " + text);
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 ||
        second > 60)
        throw std::invalid_argument("timestamp field out of range: " + text);
    std::int64_t days = days_from_civil(year, static_cast<unsigned>(month),
                                        static_cast<unsigned>(day));
    std::int64_t s = days * 86400 + hour * 3600 + minute * 60 + second;
    if (s < 0) throw std::invalid_argument("negative timestamp: " + text);
    return Timestamp{s};
}

std::string to_iso8601(Timestamp t) {
    std::int64_t days = t.seconds_utc / 86400;
    std::int64_t rem = t.seconds_utc % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    std::int64_t y;
    unsigned m, d;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                  static_cast<long long>(y), m, d, static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem % 3600) / 60),
                  static_cast<long long>(rem % 60));
    return buf;
}

}  // namespace glucolens
