#include "abacode/binary_io.hpp"

#include <bit>
#include <cstring>

namespace abacode::io {

namespace {

// Values are stored little-endian regardless of host order.
void put_le(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i)
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out.write(buf, 8);
}

std::uint64_t get_le(const unsigned char* buf) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

// Guard against absurd sizes in corrupt files before allocating.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

} // namespace

void Writer::header(RecordKind kind) {
    out_.write(kMagic, 4);
    u8(static_cast<std::uint8_t>(kind));
}

void Writer::u8(std::uint8_t v) {
    out_.put(static_cast<char>(v));
}

void Writer::u64(std::uint64_t v) {
    put_le(out_, v);
}

void Writer::f64(double v) {
    put_le(out_, std::bit_cast<std::uint64_t>(v));
}

void Writer::bytes(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void Writer::vector(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        f64(v[i]);
}

void Writer::matrix(const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            f64(m(r, c));
}

void Reader::read_raw(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
        fail(ErrorKind::Load, "unexpected end of snapshot data");
}

RecordKind Reader::header_any() {
    char magic[4];
    read_raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        fail(ErrorKind::Load, "bad record magic");
    return static_cast<RecordKind>(u8());
}

void Reader::header(RecordKind expected) {
    const auto kind = static_cast<int>(header_any());
    if (kind != static_cast<int>(expected))
        fail(ErrorKind::Load, "unexpected record kind " + std::to_string(kind) + ", wanted " +
                                  std::to_string(static_cast<int>(expected)));
}

std::uint8_t Reader::u8() {
    char c;
    read_raw(&c, 1);
    return static_cast<std::uint8_t>(c);
}

std::uint64_t Reader::u64() {
    unsigned char buf[8];
    read_raw(reinterpret_cast<char*>(buf), 8);
    return get_le(buf);
}

double Reader::f64() {
    return std::bit_cast<double>(u64());
}

std::string Reader::bytes() {
    const auto n = u64();
    if (n > kMaxElements)
        fail(ErrorKind::Load, "string length out of range");
    std::string s(n, '\0');
    read_raw(s.data(), n);
    return s;
}

Vector Reader::vector(std::size_t n) {
    if (n > kMaxElements)
        fail(ErrorKind::Load, "vector length out of range");
    Vector v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        v[static_cast<Eigen::Index>(i)] = f64();
    return v;
}

Matrix Reader::matrix(std::size_t rows, std::size_t cols) {
    if (rows * cols > kMaxElements)
        fail(ErrorKind::Load, "matrix size out of range");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = f64();
    return m;
}

} // namespace abacode::io
