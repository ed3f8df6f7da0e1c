#pragma once

#include "dirac/core.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string_view>

namespace dirac::io {

/// Decimal with 9 significant digits; infinities print as "inf"/"-inf".
inline std::string format_real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    std::array<char, 64> buf{};
    std::snprintf(buf.data(), buf.size(), "%.9g", v);
    return buf.data();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << contents;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// 8-bit binary portable graymap (P5). Values are clipped to [0,1] and scaled
/// to 0..255; 1-D signals export as a single-row image.
inline std::string encode_pgm(const Signal& s) {
    std::string out = "P5\n" + std::to_string(s.shape.width()) + " " + std::to_string(s.shape.height()) + "\n255\n";
    out.reserve(out.size() + s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double v = std::clamp(s[i], 0.0, 1.0);
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
    return out;
}

inline void write_pgm(const std::filesystem::path& path, const Signal& s) { write_text_file(path, encode_pgm(s)); }

// Little-endian binary helpers. Everything is written byte by byte so the
// format does not depend on host endianness.

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view bytes(std::size_t n) {
        need(n);
        auto v = data_.substr(pos_, n);
        pos_ += n;
        return v;
    }
    bool at_end() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw std::runtime_error("binary file truncated");
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

inline constexpr std::string_view kSignalMagic = "DIRACSIG";
inline constexpr std::uint8_t kSignalVersion = 1;

/// Raw signal layout: 8-byte magic "DIRACSIG", version byte, rank byte (1 or
/// 2), rank x u64 dims, then n little-endian f64 values.
inline std::string encode_signal(const Signal& s) {
    std::string out(kSignalMagic);
    out.push_back(static_cast<char>(kSignalVersion));
    out.push_back(static_cast<char>(s.shape.is_2d() ? 2 : 1));
    if (s.shape.is_2d()) put_u64(out, s.shape.height());
    put_u64(out, s.shape.width());
    for (std::size_t i = 0; i < s.size(); ++i) put_f64(out, s[i]);
    return out;
}

inline Signal decode_signal(std::string_view data) {
    ByteReader r(data);
    if (r.bytes(kSignalMagic.size()) != kSignalMagic) throw std::runtime_error("signal file: bad magic");
    if (r.u8() != kSignalVersion) throw std::runtime_error("signal file: unsupported version");
    const auto rank = r.u8();
    Shape shape;
    if (rank == 1) {
        shape = Shape::line(r.u64());
    } else if (rank == 2) {
        const auto h = r.u64();
        shape = Shape::grid(h, r.u64());
    } else {
        throw std::runtime_error("signal file: rank must be 1 or 2");
    }
    Vector v(static_cast<Eigen::Index>(shape.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = r.f64();
    if (!r.at_end()) throw std::runtime_error("signal file: trailing bytes");
    return Signal(std::move(v), shape);
}

inline void write_signal(const std::filesystem::path& path, const Signal& s) { write_text_file(path, encode_signal(s)); }
inline Signal read_signal(const std::filesystem::path& path) { return decode_signal(read_text_file(path)); }

}  // namespace dirac::io
