#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "factmatch/error.hpp"

namespace factmatch::binary {

// Little-endian regardless of host order.

inline void write_u32(std::ostream& out, std::uint32_t v)
{
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) {
        b[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
    }
    out.write(b.data(), b.size());
}

inline void write_u64(std::ostream& out, std::uint64_t v)
{
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
    }
    out.write(b.data(), b.size());
}

inline void write_f64(std::ostream& out, double v)
{
    write_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void write_string(std::ostream& out, std::string_view s)
{
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void read_exact(std::istream& in, char* dst, std::size_t n)
{
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw FormatVersionError("truncated binary file");
    }
}

inline std::uint32_t read_u32(std::istream& in)
{
    std::array<unsigned char, 4> b{};
    read_exact(in, reinterpret_cast<char*>(b.data()), b.size());
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | b[i];
    }
    return v;
}

inline std::uint64_t read_u64(std::istream& in)
{
    std::array<unsigned char, 8> b{};
    read_exact(in, reinterpret_cast<char*>(b.data()), b.size());
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | b[i];
    }
    return v;
}

inline double read_f64(std::istream& in)
{
    return std::bit_cast<double>(read_u64(in));
}

inline std::string read_string(std::istream& in, std::uint64_t max_len = 1ULL << 32)
{
    auto n = read_u64(in);
    if (n > max_len) {
        throw FormatVersionError("string length out of range");
    }
    std::string s(n, '\0');
    read_exact(in, s.data(), n);
    return s;
}

/// 8-byte magic followed by a u32 version.
inline void write_header(std::ostream& out, std::string_view magic, std::uint32_t version)
{
    out.write(magic.data(), 8);
    write_u32(out, version);
}

inline void expect_header(std::istream& in, std::string_view magic, std::uint32_t version)
{
    std::array<char, 8> m{};
    read_exact(in, m.data(), m.size());
    if (std::string_view(m.data(), m.size()) != magic.substr(0, 8)) {
        throw FormatVersionError("bad magic: expected " + std::string(magic.substr(0, 8)));
    }
    auto v = read_u32(in);
    if (v != version) {
        throw FormatVersionError("unsupported version " + std::to_string(v) + " (expected "
                                 + std::to_string(version) + ")");
    }
}

}  // namespace factmatch::binary
