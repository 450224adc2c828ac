#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace tdpg {

// Enough digits to round-trip a double exactly.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string join_csv(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ",";
        line += fields[i];
    }
    return line;
}

}  // namespace tdpg
