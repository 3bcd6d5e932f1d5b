/**
 * @file   npy.hpp
 *
 * @brief  NPY v1.0 (little-endian float64 / int32) writer and reader, plus
 *         the JSON sidecar that accompanies field dumps.
 */
#pragma once

#include "homog/grid_fields.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace homog::npy {

  static_assert(std::endian::native == std::endian::little,
                "NPY writer assumes a little-endian host");

  struct Array {
    std::vector<std::size_t> shape{};
    std::string descr{"<f8"};
    std::vector<double> data{};
  };

  namespace detail {
    inline std::string header(const std::string & descr,
                              const std::vector<std::size_t> & shape) {
      std::ostringstream dict;
      dict << "{'descr': '" << descr << "', 'fortran_order': False, 'shape': (";
      for (std::size_t i = 0; i < shape.size(); ++i) {
        dict << shape[i];
        if (shape.size() == 1 || i + 1 < shape.size()) dict << ",";
        if (i + 1 < shape.size()) dict << " ";
      }
      dict << "), }";
      std::string h = dict.str();
      // magic(6) + version(2) + len(2) + header + '\n' padded to 64 bytes
      const std::size_t unpadded = 10 + h.size() + 1;
      h.append((64 - unpadded % 64) % 64, ' ');
      h.push_back('\n');
      return h;
    }

    template <class T>
    void write(const std::filesystem::path & path, const std::string & descr,
               const std::vector<std::size_t> & shape, std::span<const T> data) {
      std::size_t count{1};
      for (auto s : shape) count *= s;
      if (count != data.size()) {
        throw std::invalid_argument("npy: shape does not match data size");
      }
      std::ofstream out(path, std::ios::binary);
      if (!out) {
        throw std::runtime_error("npy: cannot open " + path.string());
      }
      const std::string h = header(descr, shape);
      const char magic[] = "\x93NUMPY";
      out.write(magic, 6);
      const char version[2] = {1, 0};
      out.write(version, 2);
      const auto len = static_cast<std::uint16_t>(h.size());
      const char lenbytes[2] = {static_cast<char>(len & 0xff),
                                static_cast<char>(len >> 8)};
      out.write(lenbytes, 2);
      out.write(h.data(), static_cast<std::streamsize>(h.size()));
      out.write(reinterpret_cast<const char *>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(T)));
    }
  }  // namespace detail

  inline void write_f8(const std::filesystem::path & path,
                       const std::vector<std::size_t> & shape,
                       std::span<const double> data) {
    detail::write<double>(path, "<f8", shape, data);
  }

  inline void write_i4(const std::filesystem::path & path,
                       const std::vector<std::size_t> & shape,
                       std::span<const std::int32_t> data) {
    detail::write<std::int32_t>(path, "<i4", shape, data);
  }

  //! reads float64 and int32 arrays; int32 values are widened to double
  inline Array read(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw std::runtime_error("npy: cannot open " + path.string());
    }
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "\x93NUMPY", 6) != 0 || magic[6] != 1) {
      throw std::runtime_error("npy: not a v1.0 file");
    }
    unsigned char lenbytes[2];
    in.read(reinterpret_cast<char *>(lenbytes), 2);
    const std::size_t len = lenbytes[0] | (std::size_t(lenbytes[1]) << 8);
    std::string h(len, '\0');
    in.read(h.data(), static_cast<std::streamsize>(len));

    Array arr;
    const auto dpos = h.find("'descr': '");
    arr.descr = h.substr(dpos + 10, 3);
    const auto open = h.find('(');
    const auto close = h.find(')');
    std::stringstream dims(h.substr(open + 1, close - open - 1));
    std::string tok;
    std::size_t count{1};
    while (std::getline(dims, tok, ',')) {
      if (tok.find_first_not_of(' ') == std::string::npos) continue;
      arr.shape.push_back(std::stoull(tok));
      count *= arr.shape.back();
    }
    if (arr.descr == "<f8") {
      arr.data.resize(count);
      in.read(reinterpret_cast<char *>(arr.data.data()),
              static_cast<std::streamsize>(count * 8));
    } else if (arr.descr == "<i4") {
      std::vector<std::int32_t> tmp(count);
      in.read(reinterpret_cast<char *>(tmp.data()),
              static_cast<std::streamsize>(count * 4));
      arr.data.assign(tmp.begin(), tmp.end());
    } else {
      throw std::runtime_error("npy: unsupported dtype " + arr.descr);
    }
    if (!in) {
      throw std::runtime_error("npy: truncated file " + path.string());
    }
    return arr;
  }

  inline nlohmann::json grid_json(const GridShape & g) {
    return {{"nx", g.nx}, {"ny", g.ny}, {"lx", g.lx}, {"ly", g.ly}, {"nq", g.nq}};
  }

  /**
   * Dumps a field as `<stem>.npy` with shape (ny, nx, nq, ncomp) and writes
   * `<stem>.json` describing it.
   */
  inline void dump_field(const std::filesystem::path & stem, const QPField & f,
                         const std::string & units) {
    const auto & g = f.shape();
    write_f8(std::filesystem::path(stem).replace_extension(".npy"),
             {std::size_t(g.ny), std::size_t(g.nx), std::size_t(g.nq),
              std::size_t(f.ncomp())},
             f.values());
    nlohmann::json side{{"grid", grid_json(g)},
                        {"rank", f.rank()},
                        {"components", f.rank() == 2
                                           ? nlohmann::json{"e11", "e22", "sqrt2*e12"}
                                           : nlohmann::json(f.ncomp())},
                        {"units", units}};
    std::ofstream(std::filesystem::path(stem).replace_extension(".json"))
        << side.dump(2) << "\n";
  }

}  // namespace homog::npy
