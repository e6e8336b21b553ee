#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "stochpmp/error.hpp"

namespace stochpmp {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense array of (rows x cols) blocks indexed by (path, grid point), stored
/// path-major then time then row-major within each block. This is exactly
/// the order of the binary export.
class PathArray {
public:
    PathArray() = default;
    PathArray(std::size_t paths, std::size_t points, std::size_t rows, std::size_t cols = 1)
        : paths_(paths), points_(points), rows_(rows), cols_(cols), data_(paths * points * rows * cols, 0.0) {}

    std::size_t paths() const { return paths_; }
    std::size_t points() const { return points_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t block_size() const { return rows_ * cols_; }

    Eigen::Map<RowMatrix> block(std::size_t path, std::size_t j) {
        return {data_.data() + offset(path, j), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
    }
    Eigen::Map<const RowMatrix> block(std::size_t path, std::size_t j) const {
        return {data_.data() + offset(path, j), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
    }
    Eigen::Map<Eigen::VectorXd> vec(std::size_t path, std::size_t j) {
        return {data_.data() + offset(path, j), static_cast<Eigen::Index>(rows_ * cols_)};
    }
    Eigen::Map<const Eigen::VectorXd> vec(std::size_t path, std::size_t j) const {
        return {data_.data() + offset(path, j), static_cast<Eigen::Index>(rows_ * cols_)};
    }

    const std::vector<double>& raw() const { return data_; }
    std::vector<double>& raw() { return data_; }

    bool same_shape(const PathArray& o) const {
        return paths_ == o.paths_ && points_ == o.points_ && rows_ == o.rows_ && cols_ == o.cols_;
    }

private:
    std::size_t offset(std::size_t path, std::size_t j) const { return (path * points_ + j) * rows_ * cols_; }

    std::size_t paths_ = 0;
    std::size_t points_ = 0;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace stochpmp
