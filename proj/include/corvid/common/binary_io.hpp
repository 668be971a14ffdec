#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace corvid {

// Little-endian writer used by the versioned model files (lm.bin, nlu.bin).
class BinaryWriter {
 public:
  void magic(std::string_view tag);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);

  const std::string& bytes() const { return out_; }

 private:
  std::string out_;
};

// Bounds-checked reader; every overrun throws Error(parse_error).
class BinaryReader {
 public:
  explicit BinaryReader(std::string_view data) : data_(data) {}

  void expect_magic(std::string_view tag);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();

  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::string_view take(std::size_t n);

  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace corvid
