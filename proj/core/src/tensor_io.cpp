#include "fg/tensor_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "fg/error.hpp"

namespace fg {

namespace {

constexpr char kMagic[4] = {'F', 'G', 'T', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  check_contract(static_cast<bool>(in), "truncated tensor stream");
  return value;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write(kMagic, sizeof(kMagic));
  write_raw(out, kVersion);
  write_raw(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) {
    write_raw(out, static_cast<std::uint64_t>(d));
  }
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, sizeof(magic));
  check_contract(static_cast<bool>(in) && std::memcmp(magic, kMagic, 4) == 0,
                 "not a tensor file");
  const auto version = read_raw<std::uint32_t>(in);
  check_contract(version == kVersion, "unsupported tensor file version");
  const auto rank = read_raw<std::uint32_t>(in);
  std::vector<std::size_t> shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = static_cast<std::size_t>(read_raw<std::uint64_t>(in));
    count *= d;
  }
  std::vector<double> data(count);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  check_contract(static_cast<bool>(in), "truncated tensor payload");
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  check_config(out.good(), "cannot open tensor file for writing: " + path.string());
  write_tensor(out, t);
  check_contract(out.good(), "tensor write failed");
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check_config(in.good(), "cannot open tensor file: " + path.string());
  return read_tensor(in);
}

}  // namespace fg
