#include "groundhog/ght1.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "groundhog/errors.h"

namespace groundhog {

namespace {

static_assert(std::endian::native == std::endian::little,
              "GHT1 I/O assumes a little-endian host");

constexpr char kMagic[4] = {'G', 'H', 'T', '1'};
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("GHT1: truncated file");
  return v;
}

}  // namespace

void write_ght1(std::ostream& out, const std::vector<Ght1Tensor>& tensors) {
  std::set<std::string> names;
  out.write(kMagic, 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (!names.insert(t.name).second) throw InvalidArgument("GHT1: duplicate tensor " + t.name);
    std::uint64_t n = 1;
    for (auto d : t.dims) n *= d;
    if (n != t.data.size()) throw InvalidArgument("GHT1: dims do not match data for " + t.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
}

std::vector<Ght1Tensor> read_ght1(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("GHT1: bad magic");
  const auto count = get<std::uint32_t>(in);
  std::vector<Ght1Tensor> out;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    Ght1Tensor t;
    const auto len = get<std::uint32_t>(in);
    if (len > 4096) throw DataError("GHT1: implausible name length");
    t.name.resize(len);
    if (!in.read(t.name.data(), len)) throw DataError("GHT1: truncated name");
    if (!names.insert(t.name).second) throw DataError("GHT1: duplicate tensor " + t.name);
    const auto ndim = get<std::uint32_t>(in);
    if (ndim > 8) throw DataError("GHT1: too many dims for " + t.name);
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.dims.push_back(get<std::uint64_t>(in));
      n *= t.dims.back();
      if (n > kMaxElements) throw DataError("GHT1: tensor too large: " + t.name);
    }
    t.data.resize(n);
    if (!in.read(reinterpret_cast<char*>(t.data.data()),
                 static_cast<std::streamsize>(n * sizeof(float))))
      throw DataError("GHT1: truncated data for " + t.name);
    out.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("GHT1: trailing bytes");
  return out;
}

void save_ght1(const std::filesystem::path& path, const std::vector<Ght1Tensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_ght1(out, tensors);
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<Ght1Tensor> load_ght1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_ght1(in);
}

}  // namespace groundhog
