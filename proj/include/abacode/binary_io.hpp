#pragma once

// Flat little-endian record layout shared by every persisted model:
//
//   magic  : 4 bytes "ACDE"
//   kind   : 1 byte  (RecordKind)
//   body   : kind-specific sequence of u64 dimensions followed by
//            row-major f64 values
//
// Records may be concatenated; an agent snapshot is a header record followed
// by the records of its parts.

#include "abacode/common.hpp"

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

namespace abacode::io {

inline constexpr char kMagic[4] = {'A', 'C', 'D', 'E'};

enum class RecordKind : std::uint8_t {
    Autoencoder = 1,
    LinearEncoder = 2,
    Clusters = 3,
    Bandit = 4,
    Matrix = 5,
    AbacodeAgent = 6,
    CompressionAgent = 7,
};

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void header(RecordKind kind);
    void u8(std::uint8_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void bytes(const std::string& s); // u64 length prefix
    void vector(const Vector& v);     // values only; length written by caller
    void matrix(const Matrix& m);     // values only, row-major

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    void header(RecordKind expected);
    RecordKind header_any();
    std::uint8_t u8();
    std::uint64_t u64();
    double f64();
    std::string bytes();
    Vector vector(std::size_t n);
    Matrix matrix(std::size_t rows, std::size_t cols);

private:
    void read_raw(char* dst, std::size_t n);
    std::istream& in_;
};

} // namespace abacode::io
