#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stochpmp/model.hpp"
#include "stochpmp/path_array.hpp"

namespace stochpmp {

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// One row per (path, grid point): path, step, t, then the block entries
/// named <prefix>_<i> for vectors or <prefix>_<i>_<l> for matrices.
void write_ensemble_csv(const std::filesystem::path& file, const PathArray& a, const TimeGrid& grid,
                        const std::string& prefix);

struct BinaryHeader {
    std::uint64_t paths = 0;
    std::uint64_t steps = 0;
    std::uint64_t block = 0;  // entries per grid point (n, or n*d for matrices)
    std::uint64_t seed = 0;
};

/// Header of four little-endian uint64 {M, N, block, seed}, then M*(N+1)*block
/// doubles ordered path, grid point, row-major block.
void write_ensemble_binary(const std::filesystem::path& file, const PathArray& a, std::uint64_t seed);
BinaryHeader read_ensemble_binary(const std::filesystem::path& file, std::vector<double>& data);

void write_json(const std::filesystem::path& file, const nlohmann::json& j);
void write_text(const std::filesystem::path& file, const std::string& text);
nlohmann::json read_json_file(const std::filesystem::path& file);

}  // namespace stochpmp
