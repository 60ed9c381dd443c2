#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Small file and randomness helpers shared by the modules.
namespace biascascade::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Appends one line and flushes; the line must not contain a newline.
void append_line(const std::filesystem::path& path, std::string_view line);

// Splits on '\n', dropping a trailing '\r' and blank lines. Each entry keeps
// its 1-based line number.
struct Line {
  std::size_t number;
  std::string_view text;
};
std::vector<Line> split_lines(std::string_view text);

// Shortest round-trip decimal form of a double.
std::string format_double(double x);

// Portable draws from a 64-bit engine; unlike std distributions these are
// identical across standard library implementations.
double uniform01(std::mt19937_64& rng);
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);
std::size_t weighted_index(std::mt19937_64& rng, std::span<const double> weights);

// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace biascascade::io
