#pragma once

#include <string>

#include "stochpmp/model.hpp"

#ifndef STOCHPMP_TEST_DATA_DIR
#error "STOCHPMP_TEST_DATA_DIR must point at tests/data"
#endif

namespace testing_support {

inline std::string data_path(const std::string& name) { return std::string(STOCHPMP_TEST_DATA_DIR) + "/" + name; }

inline stochpmp::ProblemSpec fixture(const std::string& name) {
    return stochpmp::load_problem_file(data_path(name));
}

inline stochpmp::Vector vec(std::initializer_list<double> v) {
    stochpmp::Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

}  // namespace testing_support
