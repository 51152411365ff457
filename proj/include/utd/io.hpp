#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "utd/errors.hpp"
#include "utd/series.hpp"
#include "utd/types.hpp"

namespace utd::io {

// Binary sample files: "UTD1", rows and cols as little-endian uint32, a
// reserved uint32 (zero) completing the 16-byte header, then rows*cols
// little-endian float32 values in row-major order.
inline constexpr std::array<char, 4> kMagic{'U', 'T', 'D', '1'};
inline constexpr std::size_t kHeaderBytes = 16;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

inline std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline void write_binary(std::ostream& out, const Matrix& m) {
  out.write(kMagic.data(), 4);
  detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(m.cols()));
  detail::put_u32(out, 0);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) detail::put_f32(out, static_cast<float>(m(i, j)));
}

inline Matrix parse_binary(const std::string& bytes, const std::string& origin = "<memory>") {
  if (bytes.size() < kHeaderBytes) throw LoadError(origin + ": truncated header");
  if (std::memcmp(bytes.data(), kMagic.data(), 4) != 0) throw LoadError(origin + ": bad magic");
  const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t rows = detail::get_u32(b + 4), cols = detail::get_u32(b + 8);
  if (bytes.size() != kHeaderBytes + 4 * rows * cols)
    throw LoadError(origin + ": payload size does not match header");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const unsigned char* p = b + kHeaderBytes;
  for (std::uint64_t i = 0; i < rows; ++i)
    for (std::uint64_t j = 0; j < cols; ++j, p += 4) {
      const float f = std::bit_cast<float>(detail::get_u32(p));
      if (!std::isfinite(f)) throw LoadError(origin + ": non-finite value");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f;
    }
  return m;
}

inline void save_binary(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write '" + path + "'");
  write_binary(out, m);
}

inline Matrix load_binary(const std::string& path) { return parse_binary(detail::read_all(path), path); }

// CSV sample files: no header, one sample per line.
inline void write_csv(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_real(m(i, j));
    }
    out << '\n';
  }
}

inline Matrix parse_csv(std::istream& in, const std::string& origin = "<stream>") {
  std::vector<double> values;
  Eigen::Index cols = -1, rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Eigen::Index count = 0;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      const std::string field = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        throw LoadError(origin + ": bad field '" + field + "' on line " + std::to_string(rows + 1));
      }
      if (used != field.size() && field.find_first_not_of(" \t", used) != std::string::npos)
        throw LoadError(origin + ": bad field '" + field + "' on line " + std::to_string(rows + 1));
      if (!std::isfinite(v)) throw LoadError(origin + ": non-finite value on line " + std::to_string(rows + 1));
      values.push_back(v);
      ++count;
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (cols < 0) cols = count;
    if (count != cols) throw LoadError(origin + ": ragged row " + std::to_string(rows + 1));
    ++rows;
  }
  if (rows == 0) throw LoadError(origin + ": no rows");
  return Eigen::Map<const Matrix>(values.data(), rows, cols);
}

inline void save_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write '" + path + "'");
  write_csv(out, m);
}

inline Matrix load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

// Dispatch on extension: ".csv" is text, anything else binary.
inline Matrix load_samples(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return load_csv(path);
  return load_binary(path);
}

inline void save_series_csv(const std::string& path, const DiagnosticSeries& series) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write '" + path + "'");
  series.write_csv(out);
}

}  // namespace utd::io
