// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/recmodel/model.hpp"

#include <algorithm>
#include <cmath>

#include "sdist/common/binary_io.hpp"
#include "sdist/common/error.hpp"
#include "sdist/common/rng.hpp"

namespace sdist::model {
namespace {

constexpr std::string_view kCkptMagic = "DIETCKPT";
constexpr std::uint32_t kCkptVersion = 1;
constexpr std::size_t kPredictChunk = 4096;

void glorot(std::span<double> w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& x : w) x = rng.uniform(-limit, limit);
}

}  // namespace

std::string arch_name(Arch arch) { return arch == Arch::kCross ? "cross" : "mlp"; }

Arch parse_arch(const std::string& name) {
  if (name == "mlp") return Arch::kMlp;
  if (name == "cross") return Arch::kCross;
  fail(ErrorKind::kUnsupportedArchitecture, "unknown architecture: " + name);
}

DenseNet::DenseNet(Arch arch, std::size_t input_width, std::vector<std::size_t> hidden, std::size_t tasks)
    : arch_(arch), input_width_(input_width), hidden_(std::move(hidden)), tasks_(tasks) {
  require(input_width_ > 0 && tasks_ > 0, ErrorKind::kContract, "DenseNet needs positive input width and tasks");
  for (auto h : hidden_) require(h > 0, ErrorKind::kContract, "DenseNet hidden widths must be positive");
}

ParamVector DenseNet::layout() const {
  ParamVector p;
  if (arch_ == Arch::kCross) {
    p.add_segment("cross.w", input_width_, 1);
    p.add_segment("cross.b", 1, input_width_);
  }
  std::size_t in = input_width_;
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    p.add_segment("dense" + std::to_string(i) + ".W", in, hidden_[i]);
    p.add_segment("dense" + std::to_string(i) + ".b", 1, hidden_[i]);
    in = hidden_[i];
  }
  p.add_segment("head.W", in, tasks_);
  p.add_segment("head.b", 1, tasks_);
  return p;
}

ParamVector DenseNet::init(std::uint64_t seed) const {
  ParamVector p = layout();
  Rng rng(derive_seed(seed, {0xde45e}));
  for (std::size_t i = 0; i < p.segment_count(); ++i) {
    const Segment& s = p.layout()[i];
    if (s.name.ends_with(".b")) continue;
    glorot(p.segment(i), s.rows, s.cols, rng);
  }
  return p;
}

diffgrad::ForwardResult DenseNet::forward(std::span<const Var> params, const Var& inputs) const {
  require(inputs.cols() == input_width_, ErrorKind::kContract,
          "DenseNet input width " + std::to_string(inputs.cols()) + ", expected " + std::to_string(input_width_));
  std::size_t k = 0;
  Var h = inputs;
  if (arch_ == Arch::kCross) {
    const Var& w = params[k++];
    const Var& b = params[k++];
    h = ad::add(ad::add_row(ad::mul_col(inputs, ad::matmul(inputs, w)), b), inputs);
  }
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    const Var& W = params[k++];
    const Var& b = params[k++];
    h = ad::relu(ad::add_row(ad::matmul(h, W), b));
  }
  const Var& W = params[k++];
  const Var& b = params[k++];
  return {ad::add_row(ad::matmul(h, W), b), h};
}

std::optional<diffgrad::HeadSegments> DenseNet::final_affine() const {
  const std::size_t base = (arch_ == Arch::kCross ? 2 : 0) + 2 * hidden_.size();
  return diffgrad::HeadSegments{base, base + 1};
}

ModelCheckpoint init_checkpoint(const ModelSpec& spec, std::uint64_t seed) {
  require(spec.fields() > 0 && spec.dim > 0, ErrorKind::kConfig, "model spec needs fields and a positive dim");
  ModelCheckpoint c;
  c.spec = spec;
  Rng rng(derive_seed(seed, {0xe3b}));
  const double limit = 1.0 / std::sqrt(static_cast<double>(spec.dim));
  for (auto v : spec.vocab) {
    require(v > 0, ErrorKind::kConfig, "vocabulary sizes must be positive");
    Matrix t(v, spec.dim);
    for (auto& x : t.data) x = rng.uniform(-limit, limit);
    c.tables.push_back(std::move(t));
  }
  c.dense = c.net().init(derive_seed(seed, {0xd3e}));
  return c;
}

std::vector<double> embed(const ModelCheckpoint& ckpt, const data::InteractionRecord& record) {
  const std::size_t F = ckpt.spec.fields();
  const std::size_t d = ckpt.spec.dim;
  require(record.fields.size() == F, ErrorKind::kContract, "embed: record field count mismatch");
  std::vector<double> e(F * d);
  for (std::size_t f = 0; f < F; ++f) {
    require(record.fields[f] < ckpt.tables[f].rows, ErrorKind::kContract,
            "embed: id out of vocabulary in field " + std::to_string(f));
    const auto row = ckpt.tables[f].row_span(record.fields[f]);
    std::copy(row.begin(), row.end(), e.begin() + static_cast<std::ptrdiff_t>(f * d));
  }
  return e;
}

Matrix embed_batch(const ModelCheckpoint& ckpt, std::span<const data::InteractionRecord> records,
                   std::span<const std::size_t> indices) {
  const std::size_t n = indices.empty() ? records.size() : indices.size();
  Matrix out(n, ckpt.spec.input_width());
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = embed(ckpt, records[indices.empty() ? i : indices[i]]);
    std::copy(e.begin(), e.end(), out.row_span(i).begin());
  }
  return out;
}

Matrix predict_batch(const DenseNet& net, const ParamVector& dense, const Matrix& inputs) {
  ad::NoGradGuard guard;
  const auto vars = dense.to_vars(false);
  return net.forward(vars, Var(inputs)).logits.value();
}

std::vector<double> predict(const ModelCheckpoint& ckpt, std::span<const double> embedding) {
  require(embedding.size() == ckpt.spec.input_width(), ErrorKind::kContract, "predict: input width mismatch");
  const Matrix out = predict_batch(ckpt.net(), ckpt.dense, Matrix::row(embedding));
  return out.data;
}

Matrix predict_records(const ModelCheckpoint& ckpt, std::span<const data::InteractionRecord> records) {
  const DenseNet net = ckpt.net();
  Matrix out(records.size(), ckpt.spec.tasks);
  for (std::size_t lo = 0; lo < records.size(); lo += kPredictChunk) {
    const std::size_t hi = std::min(records.size(), lo + kPredictChunk);
    const Matrix logits = predict_batch(net, ckpt.dense, embed_batch(ckpt, records.subspan(lo, hi - lo)));
    std::copy(logits.data.begin(), logits.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(lo * out.cols));
  }
  return out;
}

Matrix label_matrix(std::span<const data::InteractionRecord> records) {
  const std::size_t K = records.empty() ? 0 : records[0].labels.size();
  Matrix y(records.size(), K);
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t k = 0; k < K; ++k) y(i, k) = records[i].labels[k];
  }
  return y;
}

std::vector<std::uint8_t> serialize_checkpoint(const ModelCheckpoint& c) {
  io::ByteWriter w;
  w.magic(kCkptMagic);
  w.u32(kCkptVersion);
  w.u8(static_cast<std::uint8_t>(c.spec.arch));
  w.u32(c.stage);
  w.u32(static_cast<std::uint32_t>(c.spec.fields()));
  w.u32(static_cast<std::uint32_t>(c.spec.tasks));
  w.u32(static_cast<std::uint32_t>(c.spec.dim));
  for (auto v : c.spec.vocab) w.u32(static_cast<std::uint32_t>(v));
  w.u32(static_cast<std::uint32_t>(c.spec.hidden.size()));
  for (auto h : c.spec.hidden) w.u32(static_cast<std::uint32_t>(h));
  for (const auto& t : c.tables) w.f64s(t.data);
  w.f64s(c.dense.values());
  return w.bytes();
}

ModelCheckpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  r.expect_magic(kCkptMagic);
  if (r.u32() != kCkptVersion) fail(ErrorKind::kFormat, "checkpoint: unsupported version");
  ModelCheckpoint c;
  const std::uint8_t arch = r.u8();
  if (arch > 1) fail(ErrorKind::kFormat, "checkpoint: unknown architecture tag");
  c.spec.arch = static_cast<Arch>(arch);
  c.stage = r.u32();
  const std::uint32_t F = r.u32();
  c.spec.tasks = r.u32();
  c.spec.dim = r.u32();
  if (F == 0 || c.spec.tasks == 0 || c.spec.dim == 0 || F > 4096) fail(ErrorKind::kFormat, "checkpoint: bad header");
  c.spec.vocab.resize(F);
  std::size_t table_doubles = 0;
  for (auto& v : c.spec.vocab) {
    v = r.u32();
    table_doubles += v * c.spec.dim;
  }
  const std::uint32_t nh = r.u32();
  if (nh > 64) fail(ErrorKind::kFormat, "checkpoint: bad hidden count");
  c.spec.hidden.resize(nh);
  for (auto& h : c.spec.hidden) {
    h = r.u32();
    if (h == 0) fail(ErrorKind::kFormat, "checkpoint: zero hidden width");
  }
  // Size check before allocating anything large.
  ParamVector dense = c.net().layout();
  if (r.remaining() != (table_doubles + dense.size()) * sizeof(double)) {
    fail(ErrorKind::kFormat, "checkpoint: truncated file or trailing bytes");
  }
  for (auto v : c.spec.vocab) {
    Matrix t(v, c.spec.dim);
    r.f64s(t.data);
    c.tables.push_back(std::move(t));
  }
  r.f64s(dense.values());
  c.dense = std::move(dense);
  return c;
}

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt) {
  io::write_file(path, serialize_checkpoint(ckpt));
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  const auto bytes = io::read_file(path);
  return deserialize_checkpoint(bytes);
}

}  // namespace sdist::model
