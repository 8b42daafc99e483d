#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "bzsl/errors.hpp"

// Little-endian primitives shared by the bmat matrix format and the model
// file format.
namespace bzsl::io {

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(os, bits);
}

inline std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw FormatError("unexpected end of file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double read_f64(std::istream& is) {
    const std::uint64_t bits = read_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline void write_magic(std::ostream& os, const char (&magic)[9]) {
    os.write(magic, 8);
}

inline void expect_magic(std::istream& is, const char (&magic)[9], const std::string& what) {
    char buf[8];
    is.read(buf, 8);
    if (!is || std::memcmp(buf, magic, 8) != 0) {
        throw FormatError("bad magic in " + what);
    }
}

} // namespace bzsl::io
