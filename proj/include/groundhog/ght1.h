#ifndef GROUNDHOG_GHT1_H_
#define GROUNDHOG_GHT1_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace groundhog {

// Binary tensor container:
//   "GHT1" | u32 count | per tensor: u32 name_len, name, u32 ndim,
//   u64 dims[ndim], f32 data[prod(dims)]
// All integers and floats little-endian.
struct Ght1Tensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> data;
};

void write_ght1(std::ostream& out, const std::vector<Ght1Tensor>& tensors);
// Throws DataError on bad magic, truncation, size mismatch or duplicate
// names.
std::vector<Ght1Tensor> read_ght1(std::istream& in);

void save_ght1(const std::filesystem::path& path, const std::vector<Ght1Tensor>& tensors);
std::vector<Ght1Tensor> load_ght1(const std::filesystem::path& path);

}  // namespace groundhog

#endif  // GROUNDHOG_GHT1_H_
