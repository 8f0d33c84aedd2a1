#include "gcsd/unicode.hpp"

#include <algorithm>
#include <array>

namespace gcsd::uni {

namespace {

struct Range {
    uint32_t lo, hi;
};

constexpr Range kPunctRanges[] = {
#include "punct_ranges.inc"
};

}  // namespace

uint32_t decode_next(std::string_view s, size_t& pos) {
    const auto* b = reinterpret_cast<const unsigned char*>(s.data());
    unsigned char c = b[pos];
    if (c < 0x80) {
        pos += 1;
        return c;
    }
    int n = 0;
    uint32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
        n = 1;
        cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
        n = 2;
        cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
        n = 3;
        cp = c & 0x07;
    } else {
        pos += 1;
        return 0xFFFD;
    }
    for (int i = 1; i <= n; ++i) {
        if (pos + i >= s.size() || (b[pos + i] & 0xC0) != 0x80) {
            pos += 1;
            return 0xFFFD;
        }
        cp = (cp << 6) | (b[pos + i] & 0x3F);
    }
    pos += n + 1;
    return cp;
}

std::string encode(uint32_t cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

std::vector<uint32_t> codepoints(std::string_view s) {
    std::vector<uint32_t> out;
    size_t pos = 0;
    while (pos < s.size()) out.push_back(decode_next(s, pos));
    return out;
}

size_t length(std::string_view s) {
    size_t n = 0, pos = 0;
    while (pos < s.size()) {
        decode_next(s, pos);
        ++n;
    }
    return n;
}

std::string truncate(std::string_view s, size_t n) {
    size_t pos = 0, count = 0;
    while (pos < s.size() && count < n) {
        decode_next(s, pos);
        ++count;
    }
    return std::string(s.substr(0, pos));
}

bool is_punct(uint32_t cp) {
    auto it = std::upper_bound(std::begin(kPunctRanges), std::end(kPunctRanges), cp,
                               [](uint32_t v, const Range& r) { return v < r.lo; });
    if (it == std::begin(kPunctRanges)) return false;
    --it;
    return cp >= it->lo && cp <= it->hi;
}

bool is_whitespace(uint32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == 0x3000 || cp == 0x00A0;
}

}  // namespace gcsd::uni
