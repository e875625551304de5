#include "abacode/common.hpp"

namespace abacode {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Input: return "input";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::File: return "file";
    case ErrorKind::Format: return "format";
    case ErrorKind::Training: return "training";
    case ErrorKind::Load: return "load";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

bool all_finite(const Vector& v) {
    return v.allFinite();
}

} // namespace abacode
