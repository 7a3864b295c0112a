#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>

#include "qiopa/errors.hpp"

namespace qiopa {

/// Shortest round-trip decimal form, locale-independent (so CSV output is
/// byte-identical across runs and platforms).
inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream os(path);
    if (!os) throw Error("cannot open output file: " + path.string());
    return os;
}

} // namespace qiopa
