#include "vaguegan/npy.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>
#include <string>

#include "vaguegan/errors.hpp"

namespace vaguegan::io {

void write_npy(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
               std::span<const double> values, NpyType type) {
  std::size_t count = 1;
  for (auto d : shape) count *= d;
  if (count != values.size()) throw ShapeError("write_npy: shape does not match data");

  std::string dims;
  for (auto d : shape) dims += std::to_string(d) + ", ";
  if (!dims.empty()) dims.pop_back();  // "(n,)" / "(a, b,)"
  std::string header = std::string("{'descr': '") +
                       (type == NpyType::kFloat32 ? "<f4" : "<f8") +
                       "', 'fortran_order': False, 'shape': (" + dims + "), }";
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header += '\n';

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write("\x93NUMPY\x01\x00", 8);
  const auto len = static_cast<std::uint16_t>(header.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  os.write(len_bytes, 2);
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  if (type == NpyType::kFloat32) {
    std::vector<float> buf(values.begin(), values.end());
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  } else {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(double)));
  }
  if (!os) throw IoError("cannot write " + path.string());
}

NpyArray read_npy(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingFileError("cannot open " + path.string());
  char magic[8];
  unsigned char len_bytes[2];
  is.read(magic, 8);
  is.read(reinterpret_cast<char*>(len_bytes), 2);
  if (!is || std::memcmp(magic, "\x93NUMPY\x01", 7) != 0) {
    throw DecodeError(path.string() + ": not an npy v1 file");
  }
  std::string header(len_bytes[0] | (len_bytes[1] << 8), '\0');
  is.read(header.data(), static_cast<std::streamsize>(header.size()));

  std::smatch m;
  if (!std::regex_search(header, m, std::regex("'descr': '<f([48])'")) ) {
    throw DecodeError(path.string() + ": unsupported dtype");
  }
  const bool is_f4 = m[1] == "4";
  if (header.find("'fortran_order': False") == std::string::npos) {
    throw DecodeError(path.string() + ": fortran order unsupported");
  }
  if (!std::regex_search(header, m, std::regex("'shape': \\(([^)]*)\\)"))) {
    throw DecodeError(path.string() + ": missing shape");
  }
  NpyArray out;
  const std::string dims = m[1];
  const std::regex num("[0-9]+");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), num); it != std::sregex_iterator();
       ++it) {
    out.shape.push_back(std::stoull(it->str()));
  }
  std::size_t count = 1;
  for (auto d : out.shape) count *= d;
  out.values.resize(count);
  if (is_f4) {
    std::vector<float> buf(count);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * 4));
    std::copy(buf.begin(), buf.end(), out.values.begin());
  } else {
    is.read(reinterpret_cast<char*>(out.values.data()), static_cast<std::streamsize>(count * 8));
  }
  if (!is) throw DecodeError(path.string() + ": truncated data");
  return out;
}

}  // namespace vaguegan::io
