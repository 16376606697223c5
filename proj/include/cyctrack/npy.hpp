#pragma once

// Minimal reader/writer for little-endian float64 NumPy .npy files (format
// version 1.0, C order).

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cyctrack/error.hpp"

namespace cyctrack::npy {

static_assert(std::endian::native == std::endian::little, "npy writer assumes little-endian");

struct Array {
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

inline void write(const std::string& path, const std::vector<std::size_t>& shape,
                  const std::vector<double>& data) {
  std::size_t count = 1;
  for (std::size_t s : shape) count *= s;
  if (count != data.size()) throw ContractViolation("npy: shape does not match data size");

  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    header += std::to_string(shape[i]);
    if (shape.size() == 1 || i + 1 < shape.size()) header += ",";
    if (i + 1 < shape.size()) header += " ";
  }
  header += "), }";
  // Magic (6) + version (2) + length (2) + header, padded with spaces to a
  // multiple of 64 and terminated by a newline.
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header += '\n';

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write("\x93NUMPY", 6);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const auto len = static_cast<std::uint16_t>(header.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
}

/// Reads files produced by `write`.
inline Array read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0) throw DataError(path + ": not an npy file");
  char version[2];
  in.read(version, 2);
  unsigned char len_bytes[2];
  in.read(reinterpret_cast<char*>(len_bytes), 2);
  const std::size_t len = len_bytes[0] | (static_cast<std::size_t>(len_bytes[1]) << 8);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (header.find("'<f8'") == std::string::npos) throw DataError(path + ": expected float64");

  Array a;
  const auto open = header.find('(');
  const auto close = header.find(')');
  if (open == std::string::npos || close == std::string::npos) throw DataError(path + ": bad shape");
  std::string dims = header.substr(open + 1, close - open - 1);
  std::size_t pos = 0;
  while (pos < dims.size()) {
    const auto comma = dims.find(',', pos);
    const std::string tok = dims.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (tok.find_first_not_of(' ') != std::string::npos) a.shape.push_back(std::stoul(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  std::size_t count = 1;
  for (std::size_t s : a.shape) count *= s;
  a.data.resize(count);
  in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw DataError(path + ": truncated data");
  return a;
}

}  // namespace cyctrack::npy
