#include "corvid/common/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "corvid/common/error.hpp"

namespace corvid {

void BinaryWriter::magic(std::string_view tag) { out_.append(tag); }

void BinaryWriter::u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void BinaryWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.append(s);
}

std::string_view BinaryReader::take(std::size_t n) {
  if (data_.size() - pos_ < n) {
    throw Error(Errc::parse_error, "truncated binary data");
  }
  auto view = data_.substr(pos_, n);
  pos_ += n;
  return view;
}

void BinaryReader::expect_magic(std::string_view tag) {
  if (data_.size() - pos_ < tag.size() || data_.substr(pos_, tag.size()) != tag) {
    throw Error(Errc::parse_error, "bad file header, expected " + std::string(tag));
  }
  pos_ += tag.size();
}

std::uint8_t BinaryReader::u8() { return static_cast<std::uint8_t>(take(1)[0]); }

std::uint32_t BinaryReader::u32() {
  auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[i]);
  return v;
}

std::uint64_t BinaryReader::u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[i]);
  return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
  auto n = u32();
  return std::string(take(n));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(Errc::io_error, "short write to " + path);
}

}  // namespace corvid
