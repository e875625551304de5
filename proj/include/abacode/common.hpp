#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace abacode {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

enum class ErrorKind {
    Config,
    Input,
    Numerical,
    Protocol,
    Parse,
    File,
    Format,
    Training,
    Load,
    Contract,
    Io,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this one exception type; callers
// that need to branch inspect kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition)
        fail(kind, message);
}

// splitmix64 finalizer; used to derive independent sub-seeds from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

bool all_finite(const Vector& v);

} // namespace abacode
