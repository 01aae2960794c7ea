#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace replykit {

// Little-endian binary encoding for model artifacts. Every artifact starts
// with an 8-byte ASCII magic followed by a u32 format version.
class BinaryWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void f64_span(std::span<const double> v);
  void str(std::string_view s);  // u32 length + bytes
  void magic(std::string_view tag8);

  const std::string& bytes() const { return buf_; }
  void write_file(const std::string& path) const;

 private:
  std::string buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string bytes) : buf_(std::move(bytes)) {}
  static BinaryReader from_file(const std::string& path);

  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  void f64_span(std::span<double> out);
  std::string str();
  void expect_magic(std::string_view tag8, std::string_view what);
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n, const char* what);
  std::string buf_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a64(std::string_view bytes);

// Atomic file replace: write to <path>.tmp then rename.
void write_file_atomic(const std::string& path, std::string_view contents);

std::string read_file(const std::string& path);

}  // namespace replykit
