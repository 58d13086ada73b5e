// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/datastream/records.hpp"

#include <string>

#include "sdist/common/error.hpp"

namespace sdist::data {

std::uint32_t label_key(std::span<const std::uint8_t> labels) {
  require(labels.size() <= 32, ErrorKind::kContract, "label_key: at most 32 tasks");
  std::uint32_t key = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] != 0) key |= (1u << k);
  }
  return key;
}

std::map<std::uint32_t, std::vector<std::size_t>> group_by_label_combination(const DataBlock& block) {
  std::map<std::uint32_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < block.records.size(); ++i) groups[label_key(block.records[i].labels)].push_back(i);
  return groups;
}

void validate_record(const InteractionRecord& r, std::span<const std::size_t> vocab, std::size_t tasks) {
  require(r.fields.size() == vocab.size(), ErrorKind::kSchema,
          "record has " + std::to_string(r.fields.size()) + " fields, expected " + std::to_string(vocab.size()));
  require(r.labels.size() == tasks, ErrorKind::kSchema,
          "record has " + std::to_string(r.labels.size()) + " labels, expected " + std::to_string(tasks));
  for (std::size_t f = 0; f < vocab.size(); ++f) {
    require(r.fields[f] < vocab[f], ErrorKind::kSchema, "field " + std::to_string(f) + " id out of vocabulary");
  }
  for (auto y : r.labels) require(y <= 1, ErrorKind::kSchema, "label outside {0,1}");
}

}  // namespace sdist::data
