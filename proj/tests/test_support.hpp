#pragma once

#include "abacode/common.hpp"

#include <doctest.h>

#include <functional>

namespace abacode::testing {

/// Runs fn and checks that it throws abacode::Error of the given kind.
inline void check_error(ErrorKind kind, const std::function<void()>& fn) {
    bool thrown = false;
    try {
        fn();
    } catch (const Error& e) {
        thrown = true;
        const std::string detail = "wrong error kind: " + std::string(to_string(e.kind())) + " (" + e.what() + ")";
        CHECK_MESSAGE(e.kind() == kind, doctest::String(detail.c_str()));
    }
    const std::string detail = "expected an abacode::Error of kind " + std::string(to_string(kind));
    CHECK_MESSAGE(thrown, doctest::String(detail.c_str()));
}

inline Vector vec(std::initializer_list<double> values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (const double x : values)
        v[i++] = x;
    return v;
}

inline Matrix random_data(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    return Matrix::NullaryExpr(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                               [&](auto&&...) { return u(rng); });
}

} // namespace abacode::testing
