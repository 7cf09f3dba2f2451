#include "avtenet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <limits>

#include "avtenet/errors.hpp"

namespace avtenet {

namespace {

constexpr char kMagic[4] = {'A', 'V', 'T', 'E'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2)) throw io_error("checkpoint: truncated file");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw io_error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw io_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw io_error("checkpoint: cannot open '" + path.string() + "' for writing");
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  if (params.size() > std::numeric_limits<std::uint32_t>::max())
    throw io_error("checkpoint: too many tensors");
  put_u32(os, static_cast<std::uint32_t>(params.size()));
  // std::map iteration is already lexicographic by name.
  for (const auto& [name, t] : params) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
      throw io_error("checkpoint: tensor name too long: " + name);
    put_u16(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Shape& shape = t.shape();
    if (shape.size() > 255) throw io_error("checkpoint: rank too large for '" + name + "'");
    const unsigned char rank = static_cast<unsigned char>(shape.size());
    os.write(reinterpret_cast<const char*>(&rank), 1);
    for (std::size_t d : shape) put_u64(os, d);
    for (double v : t.values()) put_f64(os, v);
  }
  if (!os) throw io_error("checkpoint: write failed for '" + path.string() + "'");
}

ParameterSet load_checkpoint(const std::filesystem::path& path, bool trainable) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("checkpoint: cannot open '" + path.string() + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw io_error("checkpoint: bad magic in '" + path.string() + "'");
  const std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw io_error("checkpoint: unsupported version " + std::to_string(version) + " in '" +
                   path.string() + "'");
  const std::uint32_t count = get_u32(is);
  ParameterSet params;
  std::string prev;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = get_u16(is);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw io_error("checkpoint: truncated file");
    if (i > 0 && !(prev < name))
      throw io_error("checkpoint: tensor names out of order ('" + prev + "' then '" + name + "')");
    prev = name;
    unsigned char rank;
    if (!is.read(reinterpret_cast<char*>(&rank), 1)) throw io_error("checkpoint: truncated file");
    Shape shape(rank);
    for (unsigned char d = 0; d < rank; ++d) shape[d] = get_u64(is);
    const std::size_t numel = shape_numel(shape);
    std::vector<double> data(numel);
    for (std::size_t j = 0; j < numel; ++j) data[j] = get_f64(is);
    params.emplace(name, Tensor(std::move(shape), std::move(data), trainable));
  }
  is.peek();
  if (!is.eof()) throw io_error("checkpoint: trailing bytes in '" + path.string() + "'");
  return params;
}

}  // namespace avtenet
