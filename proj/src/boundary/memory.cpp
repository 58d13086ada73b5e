// Copyright 2026 The streamdistill Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdist/boundary/memory.hpp"

#include <algorithm>

#include "sdist/common/binary_io.hpp"
#include "sdist/common/error.hpp"
#include "sdist/diffgrad/autograd.hpp"

namespace sdist::boundary {
namespace {

constexpr std::string_view kSynMagic = "DIETSYN";
constexpr std::uint32_t kSynVersion = 1;

}  // namespace

addressing::PointSet SyntheticMemory::points() const {
  const std::size_t n = samples.size();
  const std::size_t D = n ? samples[0].embedding.size() : 0;
  const std::size_t K = n ? samples[0].logits.size() : 0;
  addressing::PointSet p{Matrix(n, D), Matrix(n, K)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = samples[i];
    require(s.embedding.size() == D && s.logits.size() == K, ErrorKind::kContract, "synthetic memory is ragged");
    std::copy(s.embedding.begin(), s.embedding.end(), p.inputs.row_span(i).begin());
    for (std::size_t k = 0; k < K; ++k) p.targets(i, k) = ad::stable_sigmoid(s.logits[k]);
  }
  return p;
}

std::size_t SyntheticMemory::bytes() const {
  std::size_t b = 0;
  for (const auto& s : samples) b += (s.embedding.size() + s.logits.size()) * sizeof(double);
  return b;
}

SyntheticMemory concatenate(std::span<const SyntheticMemory> parts) {
  SyntheticMemory out;
  for (const auto& p : parts) {
    out.samples.insert(out.samples.end(), p.samples.begin(), p.samples.end());
    out.stage = p.stage;
  }
  return out;
}

std::vector<std::uint8_t> serialize_memory(const SyntheticMemory& m, std::size_t width, std::size_t tasks) {
  io::ByteWriter w;
  w.magic(kSynMagic);
  w.u32(kSynVersion);
  w.u32(m.stage);
  w.u32(static_cast<std::uint32_t>(m.samples.size()));
  w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(tasks));
  for (const auto& s : m.samples) {
    require(s.embedding.size() == width && s.logits.size() == tasks, ErrorKind::kContract,
            "serialize_memory: sample shape mismatch");
    w.u8(static_cast<std::uint8_t>(s.origin));
    w.u32(s.origin_stage);
    w.f64s(s.embedding);
    w.f64s(s.logits);
  }
  return w.bytes();
}

SyntheticMemory deserialize_memory(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "distilled dataset");
  r.expect_magic(kSynMagic);
  if (r.u32() != kSynVersion) fail(ErrorKind::kFormat, "distilled dataset: unsupported version");
  SyntheticMemory m;
  m.stage = r.u32();
  const std::uint32_t count = r.u32();
  const std::uint32_t width = r.u32();
  const std::uint32_t tasks = r.u32();
  const std::size_t per = 1 + 4 + (static_cast<std::size_t>(width) + tasks) * sizeof(double);
  if (r.remaining() != per * count) fail(ErrorKind::kFormat, "distilled dataset: truncated file or trailing bytes");
  m.samples.resize(count);
  for (auto& s : m.samples) {
    const std::uint8_t origin = r.u8();
    if (origin > 1) fail(ErrorKind::kFormat, "distilled dataset: bad origin tag");
    s.origin = static_cast<Origin>(origin);
    s.origin_stage = r.u32();
    s.embedding.resize(width);
    s.logits.resize(tasks);
    r.f64s(s.embedding);
    r.f64s(s.logits);
  }
  return m;
}

void save_memory(const std::string& path, const SyntheticMemory& memory, std::size_t width, std::size_t tasks) {
  io::write_file(path, serialize_memory(memory, width, tasks));
}

SyntheticMemory load_memory(const std::string& path) {
  const auto bytes = io::read_file(path);
  return deserialize_memory(bytes);
}

}  // namespace sdist::boundary
