// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/datastream/csv_log.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <sstream>
#include <string_view>

#include "sdist/common/binary_io.hpp"
#include "sdist/common/error.hpp"
#include "sdist/common/hash.hpp"

namespace sdist::data {
namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string expected_header(std::size_t fields, std::size_t tasks) {
  std::string h = "ts";
  for (std::size_t f = 0; f < fields; ++f) h += ",f" + std::to_string(f);
  for (std::size_t k = 0; k < tasks; ++k) h += ",y" + std::to_string(k);
  return h;
}

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  fail(ErrorKind::kParse, "line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::uint32_t hashed_bucket(const std::string& token, std::uint32_t buckets) {
  require(buckets >= 2 && std::has_single_bit(buckets), ErrorKind::kSchema, "hash_buckets must be a power of two >= 2");
  const unsigned shift = 64u - static_cast<unsigned>(std::countr_zero(buckets));
  return static_cast<std::uint32_t>((fnv1a(token) * 0x9e3779b97f4a7c15ULL) >> shift);
}

Vocabulary::Vocabulary(const LogSchema& schema)
    : schema_(schema), index_(schema.fields), tokens_(schema.fields) {}

std::uint32_t Vocabulary::encode(std::size_t field, const std::string& token) {
  if (schema_.vocab_mode == VocabMode::kHashed) return hashed_bucket(token, schema_.hash_buckets);
  auto [it, inserted] = index_[field].try_emplace(token, static_cast<std::uint32_t>(tokens_[field].size()));
  if (inserted) tokens_[field].push_back(token);
  return it->second;
}

std::string Vocabulary::decode(std::size_t field, std::uint32_t id) const {
  if (schema_.vocab_mode == VocabMode::kHashed) return std::to_string(id);
  require(field < tokens_.size() && id < tokens_[field].size(), ErrorKind::kContract, "decode: unknown id");
  return tokens_[field][id];
}

std::vector<std::size_t> Vocabulary::sizes() const {
  std::vector<std::size_t> out(schema_.fields);
  for (std::size_t f = 0; f < schema_.fields; ++f) {
    out[f] = schema_.vocab_mode == VocabMode::kHashed ? schema_.hash_buckets : std::max<std::size_t>(1, tokens_[f].size());
  }
  return out;
}

IngestResult ingest_csv_text(const std::string& text, const LogSchema& schema) {
  require(schema.fields > 0 && schema.tasks > 0 && schema.tasks <= 32, ErrorKind::kSchema, "schema needs F >= 1, 1 <= K <= 32");
  if (schema.vocab_mode == VocabMode::kHashed) hashed_bucket("", schema.hash_buckets);
  IngestResult out{{}, Vocabulary(schema)};
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  const std::size_t width = 1 + schema.fields + schema.tasks;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line != expected_header(schema.fields, schema.tasks)) parse_error(lineno, "header does not match schema");
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != width) {
      parse_error(lineno, "expected " + std::to_string(width) + " columns, got " + std::to_string(cells.size()));
    }
    InteractionRecord r;
    {
      const auto c = cells[0];
      auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), r.timestamp);
      if (ec != std::errc() || p != c.data() + c.size()) parse_error(lineno, "bad timestamp");
    }
    r.fields.resize(schema.fields);
    for (std::size_t f = 0; f < schema.fields; ++f) {
      if (cells[1 + f].empty()) parse_error(lineno, "empty field value");
      r.fields[f] = out.vocab.encode(f, std::string(cells[1 + f]));
    }
    r.labels.resize(schema.tasks);
    for (std::size_t k = 0; k < schema.tasks; ++k) {
      const auto c = cells[1 + schema.fields + k];
      int v = -1;
      auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || p != c.data() + c.size()) parse_error(lineno, "bad label");
      if (v != 0 && v != 1) fail(ErrorKind::kSchema, "line " + std::to_string(lineno) + ": label outside {0,1}");
      r.labels[k] = static_cast<std::uint8_t>(v);
    }
    out.records.push_back(std::move(r));
  }
  if (!have_header) parse_error(lineno == 0 ? 1 : lineno, "missing header");
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const InteractionRecord& a, const InteractionRecord& b) { return a.timestamp < b.timestamp; });
  return out;
}

IngestResult ingest_csv(const std::string& path, const LogSchema& schema) {
  const auto bytes = io::read_file(path);
  return ingest_csv_text(std::string(bytes.begin(), bytes.end()), schema);
}

std::string export_csv_text(const std::vector<InteractionRecord>& records, std::size_t fields, std::size_t tasks,
                            const Vocabulary* vocab) {
  std::string out = expected_header(fields, tasks) + "\n";
  for (const auto& r : records) {
    out += std::to_string(r.timestamp);
    for (std::size_t f = 0; f < fields; ++f) {
      out += ',';
      out += vocab ? vocab->decode(f, r.fields[f]) : std::to_string(r.fields[f]);
    }
    for (std::size_t k = 0; k < tasks; ++k) {
      out += ',';
      out += r.labels[k] ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

void export_csv(const std::string& path, const std::vector<InteractionRecord>& records, std::size_t fields,
                std::size_t tasks, const Vocabulary* vocab) {
  io::write_text(path, export_csv_text(records, fields, tasks, vocab));
}

}  // namespace sdist::data
