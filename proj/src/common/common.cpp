// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <numeric>
#include <unordered_map>

#include "sdist/common/binary_io.hpp"
#include "sdist/common/error.hpp"
#include "sdist/common/log.hpp"
#include "sdist/common/rng.hpp"

namespace sdist {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNumerical: return "numerical_failure";
    case ErrorKind::kContract: return "contract_violation";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kParse: return "parse_error";
    case ErrorKind::kSchema: return "schema_error";
    case ErrorKind::kFormat: return "format_error";
    case ErrorKind::kLayout: return "layout_error";
    case ErrorKind::kConfig: return "configuration_error";
    case ErrorKind::kUndefinedMetric: return "undefined_metric";
    case ErrorKind::kUnsupportedArchitecture: return "unsupported_architecture";
    case ErrorKind::kIo: return "io_error";
  }
  return "unknown";
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  if (k > n) k = n;
  // Sparse partial Fisher-Yates: O(k) memory regardless of n.
  std::unordered_map<std::size_t, std::size_t> swapped;
  std::vector<std::size_t> out;
  out.reserve(k);
  auto at = [&](std::size_t i) {
    auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    const std::size_t vi = at(i);
    const std::size_t vj = at(j);
    out.push_back(vj);
    swapped[j] = vi;
  }
  return out;
}

namespace log {
namespace {
Level g_level = Level::kWarn;
std::atomic<std::size_t> g_warnings{0};
}  // namespace

void set_level(Level l) { g_level = l; }
Level level() { return g_level; }

void warn(const std::string& msg) {
  ++g_warnings;
  if (g_level != Level::kQuiet) std::cerr << "warning: " << msg << '\n';
}

void info(const std::string& msg) {
  if (g_level == Level::kInfo) std::cerr << msg << '\n';
}

std::size_t warning_count() { return g_warnings.load(); }
void reset_warning_count() { g_warnings = 0; }
}  // namespace log

namespace io {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const unsigned char> bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::kIo, "short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::kIo, "cannot rename " + tmp + ": " + ec.message());
}

void write_text(const std::string& path, std::string_view text) {
  write_file(path, {reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

}  // namespace io
}  // namespace sdist
