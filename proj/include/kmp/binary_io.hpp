#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "kmp/common.hpp"
#include "kmp/tensor.hpp"

namespace kmp {

// Little-endian binary primitives shared by all file formats. The host is
// assumed little-endian (checked once at load time via a magic field).

inline void write_u64(std::ostream& os, std::uint64_t x) {
    os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

inline void write_i64(std::ostream& os, std::int64_t x) {
    os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

inline void write_f64(std::ostream& os, double x) {
    os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

inline std::uint64_t read_u64(std::istream& is, const std::string& what) {
    std::uint64_t x = 0;
    if (!is.read(reinterpret_cast<char*>(&x), sizeof(x)))
        throw io_error("truncated file while reading " + what + " (offset " +
                       std::to_string(static_cast<long long>(is.tellg())) + ")");
    return x;
}

inline std::int64_t read_i64(std::istream& is, const std::string& what) {
    return static_cast<std::int64_t>(read_u64(is, what));
}

inline double read_f64(std::istream& is, const std::string& what) {
    double x = 0;
    if (!is.read(reinterpret_cast<char*>(&x), sizeof(x)))
        throw io_error("truncated file while reading " + what + " (offset " +
                       std::to_string(static_cast<long long>(is.tellg())) + ")");
    return x;
}

inline void write_magic(std::ostream& os, const char magic[8]) { os.write(magic, 8); }

inline void expect_magic(std::istream& is, const char magic[8], const std::string& path) {
    char buf[8] = {};
    if (!is.read(buf, 8) || std::memcmp(buf, magic, 8) != 0)
        throw io_error(path + ": bad or missing magic header (expected '" + std::string(magic, 8) + "')");
}

inline void write_tensor(std::ostream& os, const Tensor& t) {
    write_i64(os, t.rows);
    write_i64(os, t.cols);
    for (double x : t.v) write_f64(os, x);
}

inline Tensor read_tensor(std::istream& is, const std::string& what) {
    const std::int64_t r = read_i64(is, what + " rows");
    const std::int64_t c = read_i64(is, what + " cols");
    if (r < 0 || c < 0 || r > (1LL << 32) || c > (1LL << 32))
        throw io_error("corrupt tensor header for " + what + ": " + std::to_string(r) + "x" +
                       std::to_string(c));
    Tensor t(static_cast<int>(r), static_cast<int>(c));
    for (double& x : t.v) x = read_f64(is, what + " values");
    return t;
}

}  // namespace kmp
