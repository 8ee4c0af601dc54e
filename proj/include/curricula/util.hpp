#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace curricula::util {

// Shortest decimal string that parses back to exactly the same double.
// Keeps CSV output readable ("0.1" instead of 17 digits) while guaranteeing
// lossless round trips.
std::string format_double(double value);

double parse_double(const std::string& text);
std::uint64_t parse_u64(const std::string& text);

// splitmix64 step; used to derive independent RNG streams from a base seed,
// e.g. (seed, replicate index) or (seed, stage index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64{mix_seed(seed, stream)};
}

// Splits one CSV line on commas. No quoting: all files this toolkit reads
// and writes are plain numeric/identifier tables.
std::vector<std::string> split_csv_line(const std::string& line);

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               bool skip_header = true);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

} // namespace curricula::util
