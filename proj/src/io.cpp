#include "stochpmp/io.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <sstream>

#include "stochpmp/error.hpp"

namespace stochpmp {

namespace {

std::ofstream open_out(const std::filesystem::path& file, std::ios::openmode mode = std::ios::out) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, mode | std::ios::trunc);
    if (!out) {
        throw ConfigError("cannot write " + file.string());
    }
    return out;
}

static_assert(std::endian::native == std::endian::little, "binary export assumes a little-endian host");

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_ensemble_csv(const std::filesystem::path& file, const PathArray& a, const TimeGrid& grid,
                        const std::string& prefix) {
    if (a.points() > grid.steps() + 1) {
        throw ConfigError("ensemble has more grid points than the grid");
    }
    auto out = open_out(file);
    out << "path,step,t";
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t l = 0; l < a.cols(); ++l) {
            out << ',' << prefix << '_' << i;
            if (a.cols() > 1) out << '_' << l;
        }
    }
    out << '\n';
    for (std::size_t p = 0; p < a.paths(); ++p) {
        for (std::size_t j = 0; j < a.points(); ++j) {
            out << p << ',' << j << ',' << format_double(grid.time(j));
            const auto v = a.vec(p, j);
            for (Eigen::Index k = 0; k < v.size(); ++k) out << ',' << format_double(v(k));
            out << '\n';
        }
    }
}

void write_ensemble_binary(const std::filesystem::path& file, const PathArray& a, std::uint64_t seed) {
    auto out = open_out(file, std::ios::out | std::ios::binary);
    const std::uint64_t header[4] = {a.paths(), a.points() == 0 ? 0 : a.points() - 1, a.block_size(), seed};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(a.raw().data()),
              static_cast<std::streamsize>(a.raw().size() * sizeof(double)));
}

BinaryHeader read_ensemble_binary(const std::filesystem::path& file, std::vector<double>& data) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read " + file.string());
    }
    std::uint64_t header[4];
    if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) {
        throw ConfigError("truncated ensemble header in " + file.string());
    }
    BinaryHeader h{header[0], header[1], header[2], header[3]};
    data.resize(h.paths * (h.steps + 1) * h.block);
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)))) {
        throw ConfigError("truncated ensemble data in " + file.string());
    }
    return h;
}

void write_json(const std::filesystem::path& file, const nlohmann::json& j) {
    auto out = open_out(file);
    out << j.dump(2) << '\n';
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    auto out = open_out(file);
    out << text;
}

nlohmann::json read_json_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw ConfigError("cannot open " + file.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid JSON in " + file.string() + ": " + e.what());
    }
}

}  // namespace stochpmp
