// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sdist/datastream/records.hpp"

// Interaction-log CSV: header `ts,f0,...,f{F-1},y0,...,y{K-1}`, one record
// per row. Field values are arbitrary tokens; labels are 0 or 1.

namespace sdist::data {

enum class VocabMode { kDictionary, kHashed };

struct LogSchema {
  std::size_t fields = 0;
  std::size_t tasks = 0;
  VocabMode vocab_mode = VocabMode::kDictionary;
  /// Power of two; used only in hashed mode.
  std::uint32_t hash_buckets = 1u << 16;
};

/// Token <-> id mapping per field.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(const LogSchema& schema);

  std::uint32_t encode(std::size_t field, const std::string& token);
  /// Token for an id; in hashed mode the id itself, as text.
  std::string decode(std::size_t field, std::uint32_t id) const;
  std::vector<std::size_t> sizes() const;

 private:
  LogSchema schema_;
  std::vector<std::unordered_map<std::string, std::uint32_t>> index_;
  std::vector<std::vector<std::string>> tokens_;
};

/// Multiply-shift bucket of a token (fixed constants, stable across runs).
std::uint32_t hashed_bucket(const std::string& token, std::uint32_t buckets);

struct IngestResult {
  std::vector<InteractionRecord> records;  // sorted by timestamp, stable
  Vocabulary vocab;
};

IngestResult ingest_csv(const std::string& path, const LogSchema& schema);
IngestResult ingest_csv_text(const std::string& text, const LogSchema& schema);

/// Writes records; tokens come from `vocab` when given, else raw ids.
std::string export_csv_text(const std::vector<InteractionRecord>& records, std::size_t fields, std::size_t tasks,
                            const Vocabulary* vocab = nullptr);
void export_csv(const std::string& path, const std::vector<InteractionRecord>& records, std::size_t fields,
                std::size_t tasks, const Vocabulary* vocab = nullptr);

}  // namespace sdist::data
