#include "replykit/serialize.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "replykit/error.hpp"

namespace replykit {

namespace {

template <typename T>
void put_le(std::string& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

}  // namespace

void BinaryWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(buf_, v); }

void BinaryWriter::f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_le(buf_, bits);
}

void BinaryWriter::f64_span(std::span<const double> v) {
  for (double x : v) f64(x);
}

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s.data(), s.size());
}

void BinaryWriter::magic(std::string_view tag8) {
  if (tag8.size() != 8) throw ConfigError("artifact magic must be 8 bytes");
  buf_.append(tag8.data(), tag8.size());
}

void BinaryWriter::write_file(const std::string& path) const {
  write_file_atomic(path, buf_);
}

BinaryReader BinaryReader::from_file(const std::string& path) {
  return BinaryReader(read_file(path));
}

void BinaryReader::need(std::size_t n, const char* what) {
  if (pos_ + n > buf_.size()) {
    throw DataError(std::string("truncated artifact while reading ") + what);
  }
}

std::uint32_t BinaryReader::u32() {
  need(4, "u32");
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
  }
  pos_ += 4;
  return v;
}

std::uint64_t BinaryReader::u64() {
  need(8, "u64");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
  }
  pos_ += 8;
  return v;
}

double BinaryReader::f64() {
  const std::uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

void BinaryReader::f64_span(std::span<double> out) {
  for (double& x : out) x = f64();
}

std::string BinaryReader::str() {
  const std::uint32_t n = u32();
  need(n, "string payload");
  std::string s = buf_.substr(pos_, n);
  pos_ += n;
  return s;
}

void BinaryReader::expect_magic(std::string_view tag8, std::string_view what) {
  need(8, "magic");
  const std::string_view got(buf_.data() + pos_, 8);
  if (got != tag8) {
    std::string hex;
    char tmp[4];
    for (char c : got) {
      std::snprintf(tmp, sizeof tmp, "%02x", static_cast<unsigned char>(c));
      hex += tmp;
    }
    throw DataError(std::string(what) + ": bad magic (found 0x" + hex + ", want '" +
                    std::string(tag8) + "')");
  }
  pos_ += 8;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("short write: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("rename failed for " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace replykit
