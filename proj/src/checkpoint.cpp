#include "evdn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace evdn::ad {

namespace {

constexpr char kMagic[8] = {'E', 'V', 'D', 'N', '0', '0', '0', '1'};
constexpr std::uint32_t kMaxName = 1u << 16;
constexpr std::uint32_t kMaxRank = 8;

void put_u(std::ostream& out, std::uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, bytes);
}

std::uint64_t get_u(std::istream& in, int bytes) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), bytes))
    throw std::runtime_error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const std::string& header, const ParameterSet& params) {
  out.write(kMagic, sizeof kMagic);
  put_u(out, header.size(), 4);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  put_u(out, params.size(), 4);
  for (const auto& p : params) {
    put_u(out, p.name.size(), 4);
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u(out, p.value.rank(), 4);
    for (std::size_t d : p.value.shape()) put_u(out, d, 8);
    for (double v : p.value.data()) put_u(out, std::bit_cast<std::uint64_t>(v), 8);
  }
  if (!out) throw std::runtime_error("checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw std::runtime_error("not an EVDN0001 checkpoint");
  Checkpoint ck;
  auto header_len = get_u(in, 4);
  ck.header.resize(header_len);
  if (header_len && !in.read(ck.header.data(), static_cast<std::streamsize>(header_len)))
    throw std::runtime_error("checkpoint truncated in header");
  auto count = get_u(in, 4);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name_len = static_cast<std::uint32_t>(get_u(in, 4));
    if (name_len > kMaxName) throw std::runtime_error("checkpoint parameter name too long");
    std::string name(name_len, '\0');
    if (name_len && !in.read(name.data(), name_len))
      throw std::runtime_error("checkpoint truncated in parameter name");
    auto rank = static_cast<std::uint32_t>(get_u(in, 4));
    if (rank > kMaxRank) throw std::runtime_error("checkpoint parameter rank too large");
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(get_u(in, 8));
      n *= d;
    }
    std::vector<double> values(n);
    for (auto& v : values) v = std::bit_cast<double>(get_u(in, 8));
    ck.params.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const std::string& header,
                     const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, header, params);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace evdn::ad
