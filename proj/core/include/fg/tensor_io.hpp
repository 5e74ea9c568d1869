#pragma once

#include <filesystem>
#include <iosfwd>

#include "fg/tensor.hpp"

namespace fg {

// Binary tensor file, little-endian:
//   "FGTN" | u32 version | u32 rank | u64 dims[rank] | f64 data[...]
// Round-trips are bit-exact.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace fg
