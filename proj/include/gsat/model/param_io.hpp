#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsat/model/network.hpp"

namespace gsat {

// Parameter file layout, all integers and floats little-endian:
//   "GSAT"  uint32 version  uint32 tensor_count
//   per tensor: uint32 rows  uint32 cols  float32[rows*cols] row-major
inline constexpr char kParamMagic[4] = {'G', 'S', 'A', 'T'};
inline constexpr std::uint32_t kParamVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("parameter file truncated reading " + what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

}  // namespace detail

inline void write_params(std::ostream& os, const std::vector<DenseMatrix>& tensors) {
    os.write(kParamMagic, 4);
    detail::put_u32(os, kParamVersion);
    detail::put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        detail::put_u32(os, static_cast<std::uint32_t>(t.rows()));
        detail::put_u32(os, static_cast<std::uint32_t>(t.cols()));
        for (const double v : t.data()) detail::put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
}

inline std::vector<DenseMatrix> read_params(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kParamMagic, 4) != 0)
        throw std::runtime_error("not a parameter file (bad magic)");
    const auto version = detail::get_u32(is, "version");
    if (version != kParamVersion)
        throw std::runtime_error("unsupported parameter file version " + std::to_string(version));
    const auto count = detail::get_u32(is, "tensor count");
    std::vector<DenseMatrix> out;
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto r = detail::get_u32(is, "tensor shape");
        const auto c = detail::get_u32(is, "tensor shape");
        DenseMatrix m(r, c);
        for (auto& v : m.data()) v = std::bit_cast<float>(detail::get_u32(is, "tensor data"));
        out.push_back(std::move(m));
    }
    if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error("parameter file has trailing bytes");
    return out;
}

inline void save_params(const ModelParams& p, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_params(os, p.flatten());
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline std::vector<DenseMatrix> load_param_tensors(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return read_params(is);
}

}  // namespace gsat
