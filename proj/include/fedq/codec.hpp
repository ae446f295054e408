#pragma once

#include <cstdint>
#include <vector>

#include "fedq/rng.hpp"

namespace fedq {

// Lossy gradient codecs.
//
// Quantized path: a vector v is stored as its l2 norm plus, per coordinate,
// a sign and a level index l in [0, s] ("s levels" = s equal bins between 0
// and the norm). Decoding yields norm * sign * l / s. Index selection is
// stochastic so the decoder is unbiased: with r = |v_j|/norm and l =
// floor(r*s), the index is l with probability 1 - (r*s - l), else l + 1.
//
// Bit accounting: the nominal width b = floor(log2 s) + 1 is exactly the
// number of bits that hold an index in [0, s]; the sign costs one more. The
// wire stores (1 + b) bits per coordinate plus a 32-bit norm header, and
// encoded_size_bits reports exactly that, so accounting always equals
// serialized payload length. Time-model arithmetic elsewhere uses nominal b.

inline int bit_width_for_levels(int levels) {
  int b = 1;
  while ((1 << b) - 1 < levels) ++b;  // smallest b with 2^b - 1 >= levels
  return b;
}

// Levels that exactly fill b-bit indices: s = 2^b - 1 (so b == nominal width).
inline int levels_for_bits(int bits) { return (1 << bits) - 1; }

struct quantized_gradient {
  std::uint32_t dim = 0;
  std::uint16_t levels = 0;            // s >= 1
  float norm = 0.0f;                   // f32 on the wire; decode uses this value
  std::vector<std::uint32_t> index;    // per coordinate, in [0, levels]
  std::vector<std::uint8_t> negative;  // per coordinate, 0/1

  int bit_width() const { return bit_width_for_levels(levels); }
};

// Stochastic uniform quantization. levels in [1, 65535]; v must be finite.
// A zero vector encodes to all-zero indices with norm 0.
quantized_gradient qsgd_encode(const std::vector<double>& v, int levels,
                               rng_stream& rng);

// Unbiased reconstruction: sign * norm * index / levels per coordinate.
std::vector<double> qsgd_decode(const quantized_gradient& q);

// Exact serialized payload size: dim * (1 + floor(log2 s) + 1) + 32 bits
// (per-coordinate sign + index, plus the norm header).
std::uint64_t encoded_size_bits(std::uint32_t dim, int levels);

// Dense float32 payload (full-precision uploads and broadcasts):
// 32 bits per coordinate + 32-bit header.
std::uint64_t dense_size_bits(std::uint32_t dim);

// Little-endian wire image:
//   [dim: u32][levels: u16][norm: f32][payload]
// payload packs one record per coordinate, sign bit first then index bits,
// LSB-first within bytes. Total payload bits = encoded_size_bits - 32.
std::vector<std::uint8_t> serialize(const quantized_gradient& q);
quantized_gradient deserialize(const std::vector<std::uint8_t>& bytes);

// Magnitude top-k sparsification (values kept exactly, as f32 on the wire).
struct sparse_gradient {
  std::uint32_t dim = 0;
  std::vector<std::uint32_t> idx;  // strictly increasing
  std::vector<float> val;
};

// Keep the k = max(1, round(fraction * dim)) largest-|v| coordinates; ties
// resolve to the lower index.
sparse_gradient topk_encode(const std::vector<double>& v, double fraction);

std::vector<double> topk_decode(const sparse_gradient& s);

// k * (32 value bits + ceil(log2 dim) index bits).
std::uint64_t topk_size_bits(std::uint32_t dim, std::uint32_t k);

// [dim: u32][k: u32][indices packed at ceil(log2 dim) bits][values f32],
// payload after the two counters is exactly topk_size_bits long.
std::vector<std::uint8_t> serialize_sparse(const sparse_gradient& s);
sparse_gradient deserialize_sparse(const std::vector<std::uint8_t>& bytes);

}  // namespace fedq
