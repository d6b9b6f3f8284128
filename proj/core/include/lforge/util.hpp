#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace lforge {

/// 64-bit FNV-1a; used for config, schema and artifact hashes.
constexpr std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept
{
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v);

/// Shortest text that parses back to the same double ("NA" for NaN).
std::string format_double(double v);

/// Parses a CSV cell written by format_double.
double parse_double(std::string_view cell);

std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a CSV cell when it contains a comma, quote or newline.
std::string csv_cell(std::string_view text);

/// Runs fn(i) for i in [0, n) on up to `workers` threads (0 = hardware
/// concurrency). Exceptions from fn are rethrown on the calling thread.
void parallel_for(std::size_t n, std::size_t workers, std::function<void(std::size_t)> const& fn);

} // namespace lforge
