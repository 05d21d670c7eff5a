#pragma once

// Matrix files.
//   binary: "GFBM", rows and cols as u64 little-endian, then rows*cols binary64
//           little-endian values in row-major order.
//   text:   first line "rows cols", then `rows` lines of `cols` decimal values.
// Readers detect the format from the first four bytes.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <system_error>

#include "gfb/errors.hpp"
#include "gfb/space.hpp"

namespace gfb {

enum class MatrixFormat { binary, text };

inline constexpr std::string_view kMatrixMagic = "GFBM";

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

}  // namespace detail

/// Writes `data` to `path` through a temporary file and a rename, so readers never
/// observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string encode_matrix(const Block& m, MatrixFormat fmt = MatrixFormat::binary) {
  std::string out;
  if (fmt == MatrixFormat::binary) {
    out.reserve(kMatrixMagic.size() + 16 + 8 * m.size());
    out.append(kMatrixMagic);
    detail::put_u64(out, m.rows());
    detail::put_u64(out, m.cols());
    for (double v : m.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
  }
  out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out.push_back(' ');
      out += detail::format_double(m(r, c));
    }
    out.push_back('\n');
  }
  return out;
}

namespace detail {

inline Block decode_binary(std::string_view in) {
  const std::size_t header = kMatrixMagic.size() + 16;
  if (in.size() < header) throw FormatError(in.size(), "truncated matrix header");
  const std::uint64_t rows = get_u64(in, 4);
  const std::uint64_t cols = get_u64(in, 12);
  if (rows == 0 || cols == 0) throw FormatError(4, "matrix dimensions must be positive");
  if (rows > (in.size() - header) / 8 / cols)
    throw FormatError(in.size(), "truncated matrix data: expected " + std::to_string(rows) + "x" +
                                     std::to_string(cols) + " values");
  const std::size_t expected = header + 8 * rows * cols;
  if (in.size() != expected) throw FormatError(expected, "trailing bytes after matrix data");
  std::vector<double> values(rows * cols);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<double>(get_u64(in, header + 8 * i));
    if (!std::isfinite(values[i])) throw FormatError(header + 8 * i, "non-finite matrix entry");
  }
  return Block(rows, cols, std::move(values));
}

inline Block decode_text(std::string_view in) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < in.size() && (in[pos] == ' ' || in[pos] == '\t' || in[pos] == '\r' || in[pos] == '\n'))
      ++pos;
  };
  auto token_end = [&] {
    std::size_t e = pos;
    while (e < in.size() && !(in[e] == ' ' || in[e] == '\t' || in[e] == '\r' || in[e] == '\n')) ++e;
    return e;
  };
  auto read_count = [&](const char* what) {
    skip_space();
    const std::size_t e = token_end();
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(in.data() + pos, in.data() + e, v);
    if (ec != std::errc() || ptr != in.data() + e || v == 0)
      throw FormatError(pos, std::string("expected positive ") + what);
    pos = e;
    return v;
  };
  const std::uint64_t rows = read_count("row count");
  const std::uint64_t cols = read_count("column count");
  if (rows > in.size() || cols > in.size() || rows * cols > in.size())
    throw FormatError(pos, "header dimensions exceed file size");
  std::vector<double> values;
  values.reserve(rows * cols);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    skip_space();
    if (pos >= in.size())
      throw FormatError(pos, "expected " + std::to_string(rows * cols) + " values, found " +
                                 std::to_string(i));
    const std::size_t e = token_end();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(in.data() + pos, in.data() + e, v);
    if (ec != std::errc() || ptr != in.data() + e || !std::isfinite(v))
      throw FormatError(pos, "invalid matrix entry '" + std::string(in.substr(pos, e - pos)) + "'");
    values.push_back(v);
    pos = e;
  }
  skip_space();
  if (pos != in.size()) throw FormatError(pos, "trailing data after matrix values");
  return Block(rows, cols, std::move(values));
}

}  // namespace detail

inline MatrixFormat detect_format(std::string_view in) {
  return in.substr(0, kMatrixMagic.size()) == kMatrixMagic ? MatrixFormat::binary : MatrixFormat::text;
}

inline Block decode_matrix(std::string_view in) {
  if (in.empty()) throw FormatError(0, "empty matrix file");
  return detect_format(in) == MatrixFormat::binary ? detail::decode_binary(in) : detail::decode_text(in);
}

inline Block read_matrix(const std::filesystem::path& path) {
  try {
    return decode_matrix(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(e.offset(), path.string() + ": " + e.what());
  }
}

inline void write_matrix(const std::filesystem::path& path, const Block& m,
                         MatrixFormat fmt = MatrixFormat::binary) {
  write_file_atomic(path, encode_matrix(m, fmt));
}

/// Blocks of a product point stacked vertically into one (n rows) x cols matrix.
inline Block stack_blocks(const ProductPoint& z) {
  const Shape s = z.shape();
  Block out(z.size() * s.rows, s.cols);
  for (std::size_t i = 0; i < z.size(); ++i)
    std::copy(z[i].data().begin(), z[i].data().end(), out.data().begin() + i * s.size());
  return out;
}

inline ProductPoint unstack_blocks(const Block& stacked, std::size_t n) {
  if (n == 0 || stacked.rows() % n != 0)
    throw DimensionError("unstack_blocks: " + std::to_string(stacked.rows()) +
                         " rows do not split into " + std::to_string(n) + " blocks");
  const std::size_t rows = stacked.rows() / n;
  const std::size_t size = rows * stacked.cols();
  std::vector<Block> blocks;
  blocks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto first = stacked.data().begin() + i * size;
    blocks.emplace_back(rows, stacked.cols(), std::vector<double>(first, first + size));
  }
  return ProductPoint(std::move(blocks));
}

}  // namespace gfb
