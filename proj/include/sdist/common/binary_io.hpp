// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdist/common/error.hpp"

namespace sdist::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void magic(std::string_view m) { raw(m.data(), m.size()); }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void f64s(std::span<const double> v) { raw(v.data(), v.size() * sizeof(double)); }

  const std::vector<unsigned char>& bytes() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

/// Bounds-checked reader; every short read is a format error.
class ByteReader {
 public:
  ByteReader(std::span<const unsigned char> data, std::string what)
      : data_(data), what_(std::move(what)) {}

  void raw(void* out, std::size_t n) {
    if (n > data_.size() - pos_) fail(ErrorKind::kFormat, what_ + ": truncated file");
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    raw(got.data(), got.size());
    if (got != m) fail(ErrorKind::kFormat, what_ + ": bad magic");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  double f64() {
    double v;
    raw(&v, 8);
    return v;
  }
  void f64s(std::span<double> out) { raw(out.data(), out.size() * sizeof(double)); }
  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const unsigned char> data_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::vector<unsigned char> read_file(const std::string& path);
/// Writes to `path.tmp` then renames, so readers never observe a partial file.
void write_file(const std::string& path, std::span<const unsigned char> bytes);
void write_text(const std::string& path, std::string_view text);

}  // namespace sdist::io
