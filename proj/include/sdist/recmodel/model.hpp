// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdist/datastream/records.hpp"
#include "sdist/diffgrad/engine.hpp"
#include "sdist/diffgrad/param_vector.hpp"

namespace sdist::model {

using ad::Var;

enum class Arch : std::uint8_t { kMlp = 0, kCross = 1 };

std::string arch_name(Arch arch);
Arch parse_arch(const std::string& name);

struct ModelSpec {
  Arch arch = Arch::kMlp;
  std::size_t tasks = 1;
  std::size_t dim = 32;
  std::vector<std::size_t> vocab;  // one entry per field
  std::vector<std::size_t> hidden = {128, 64};

  std::size_t fields() const { return vocab.size(); }
  std::size_t input_width() const { return vocab.size() * dim; }
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Dense predictor over concatenated field embeddings. An empty hidden list
/// gives a single affine layer (plus the cross layer for Arch::kCross).
class DenseNet final : public diffgrad::DifferentiableModel {
 public:
  DenseNet(Arch arch, std::size_t input_width, std::vector<std::size_t> hidden, std::size_t tasks);

  /// Zero-valued parameters with this network's segment layout.
  ParamVector layout() const;
  /// Glorot-uniform weights, zero biases.
  ParamVector init(std::uint64_t seed) const;

  diffgrad::ForwardResult forward(std::span<const Var> params, const Var& inputs) const override;
  std::optional<diffgrad::HeadSegments> final_affine() const override;

  Arch arch() const { return arch_; }
  std::size_t input_width() const { return input_width_; }
  std::size_t tasks() const { return tasks_; }
  const std::vector<std::size_t>& hidden() const { return hidden_; }

 private:
  Arch arch_;
  std::size_t input_width_;
  std::vector<std::size_t> hidden_;
  std::size_t tasks_;
};

struct ModelCheckpoint {
  ModelSpec spec;
  std::uint32_t stage = 0;
  std::vector<Matrix> tables;  // per field: vocab x dim
  ParamVector dense;

  DenseNet net() const { return DenseNet(spec.arch, spec.input_width(), spec.hidden, spec.tasks); }
  friend bool operator==(const ModelCheckpoint&, const ModelCheckpoint&) = default;
};

/// Fresh checkpoint: uniform(-1/sqrt(d), 1/sqrt(d)) tables and Glorot dense
/// params, both derived from `seed`.
ModelCheckpoint init_checkpoint(const ModelSpec& spec, std::uint64_t seed);

std::vector<double> embed(const ModelCheckpoint& ckpt, const data::InteractionRecord& record);
/// Rows are embed() of records[indices[i]] (all records if indices is empty).
Matrix embed_batch(const ModelCheckpoint& ckpt, std::span<const data::InteractionRecord> records,
                   std::span<const std::size_t> indices = {});

std::vector<double> predict(const ModelCheckpoint& ckpt, std::span<const double> embedding);
Matrix predict_batch(const DenseNet& net, const ParamVector& dense, const Matrix& inputs);
/// Logits for every record, in chunks.
Matrix predict_records(const ModelCheckpoint& ckpt, std::span<const data::InteractionRecord> records);

Matrix label_matrix(std::span<const data::InteractionRecord> records);

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt);
ModelCheckpoint load_checkpoint(const std::string& path);
std::vector<std::uint8_t> serialize_checkpoint(const ModelCheckpoint& ckpt);
ModelCheckpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace sdist::model
