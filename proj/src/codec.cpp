#include "fedq/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "fedq/errors.hpp"

namespace fedq {

namespace {

// LSB-first bit packer/unpacker (bit i of the stream lives at byte i/8,
// bit position i%8).
class bit_writer {
 public:
  void put(std::uint32_t value, int nbits) {
    for (int i = 0; i < nbits; ++i) {
      const std::size_t byte = pos_ >> 3;
      if (byte >= buf_.size()) buf_.push_back(0);
      if ((value >> i) & 1u) buf_[byte] |= static_cast<std::uint8_t>(1u << (pos_ & 7));
      ++pos_;
    }
  }
  std::uint64_t bits() const { return pos_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
  std::uint64_t pos_ = 0;
};

class bit_reader {
 public:
  bit_reader(const std::uint8_t* data, std::size_t size_bytes)
      : data_(data), size_bits_(static_cast<std::uint64_t>(size_bytes) * 8) {}
  std::uint32_t get(int nbits) {
    std::uint32_t v = 0;
    for (int i = 0; i < nbits; ++i) {
      if (pos_ >= size_bits_) throw data_error("quantized payload truncated");
      const std::uint8_t byte = data_[pos_ >> 3];
      if ((byte >> (pos_ & 7)) & 1u) v |= (1u << i);
      ++pos_;
    }
    return v;
  }

 private:
  const std::uint8_t* data_;
  std::uint64_t size_bits_;
  std::uint64_t pos_ = 0;
};

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  append_u32(out, bits);
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t off) {
  if (off + 4 > b.size()) throw data_error("serialized gradient truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
  return v;
}

std::uint16_t read_u16(const std::vector<std::uint8_t>& b, std::size_t off) {
  if (off + 2 > b.size()) throw data_error("serialized gradient truncated");
  return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

float read_f32(const std::vector<std::uint8_t>& b, std::size_t off) {
  const std::uint32_t bits = read_u32(b, off);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

int index_bits_for_dim(std::uint32_t dim) {
  int n = 1;
  while ((1ull << n) < dim) ++n;  // ceil(log2 dim), minimum 1
  return n;
}

}  // namespace

quantized_gradient qsgd_encode(const std::vector<double>& v, int levels,
                               rng_stream& rng) {
  if (levels < 1 || levels > 65535)
    throw sim_error("quantization levels must be in [1, 65535]");
  if (v.empty()) throw dimension_error("qsgd_encode: empty vector");
  double sq = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw sim_error("qsgd_encode: non-finite coordinate");
    sq += x * x;
  }
  quantized_gradient q;
  q.dim = static_cast<std::uint32_t>(v.size());
  q.levels = static_cast<std::uint16_t>(levels);
  q.index.assign(v.size(), 0);
  q.negative.assign(v.size(), 0);
  // The norm crosses the wire as f32; using the rounded value for the bin
  // ratios too keeps the decoder exactly unbiased.
  const float norm_f = static_cast<float>(std::sqrt(sq));
  q.norm = norm_f;
  if (norm_f == 0.0f) return q;
  const double norm = static_cast<double>(norm_f);
  const double s = static_cast<double>(levels);
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double mag = std::abs(v[j]);
    q.negative[j] = v[j] < 0.0 ? 1 : 0;
    const double scaled = mag / norm * s;  // in [0, s] (f32 rounding aside)
    double lower = std::floor(scaled);
    if (lower >= s) {
      q.index[j] = static_cast<std::uint32_t>(levels);  // ratio 1 boundary
      continue;
    }
    const double p_up = scaled - lower;  // P(choose upper endpoint)
    std::uint32_t idx = static_cast<std::uint32_t>(lower);
    if (p_up > 0.0 && rng.uniform01() < p_up) ++idx;
    q.index[j] = idx;
  }
  return q;
}

std::vector<double> qsgd_decode(const quantized_gradient& q) {
  if (q.dim == 0) throw dimension_error("qsgd_decode: empty gradient");
  if (q.index.size() != q.dim || q.negative.size() != q.dim)
    throw dimension_error("qsgd_decode: field sizes inconsistent with dim");
  if (q.levels < 1) throw sim_error("qsgd_decode: levels must be >= 1");
  std::vector<double> v(q.dim);
  const double norm = static_cast<double>(q.norm);
  const double s = static_cast<double>(q.levels);
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (q.index[j] > q.levels)
      throw data_error("qsgd_decode: level index exceeds levels");
    double x = norm * (static_cast<double>(q.index[j]) / s);
    v[j] = q.negative[j] ? -x : x;
  }
  return v;
}

std::uint64_t encoded_size_bits(std::uint32_t dim, int levels) {
  if (levels < 1 || levels > 65535)
    throw sim_error("quantization levels must be in [1, 65535]");
  const int record = 1 + bit_width_for_levels(levels);  // sign + index
  return static_cast<std::uint64_t>(dim) * record + 32;
}

std::uint64_t dense_size_bits(std::uint32_t dim) {
  return static_cast<std::uint64_t>(dim) * 32 + 32;
}

std::vector<std::uint8_t> serialize(const quantized_gradient& q) {
  if (q.index.size() != q.dim || q.negative.size() != q.dim)
    throw dimension_error("serialize: field sizes inconsistent with dim");
  const int idx_bits = q.bit_width();
  std::vector<std::uint8_t> out;
  append_u32(out, q.dim);
  append_u16(out, q.levels);
  append_f32(out, q.norm);
  bit_writer w;
  for (std::size_t j = 0; j < q.index.size(); ++j) {
    w.put(q.negative[j] ? 1u : 0u, 1);
    w.put(q.index[j], idx_bits);
  }
  const auto payload = w.take();
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

quantized_gradient deserialize(const std::vector<std::uint8_t>& bytes) {
  quantized_gradient q;
  q.dim = read_u32(bytes, 0);
  q.levels = read_u16(bytes, 4);
  q.norm = read_f32(bytes, 6);
  if (q.dim == 0) throw data_error("deserialize: zero dim");
  if (q.levels < 1) throw data_error("deserialize: zero levels");
  const int idx_bits = q.bit_width();
  bit_reader r(bytes.data() + 10, bytes.size() - 10);
  q.index.resize(q.dim);
  q.negative.resize(q.dim);
  for (std::uint32_t j = 0; j < q.dim; ++j) {
    q.negative[j] = static_cast<std::uint8_t>(r.get(1));
    q.index[j] = r.get(idx_bits);
    if (q.index[j] > q.levels)
      throw data_error("deserialize: level index exceeds levels");
  }
  return q;
}

sparse_gradient topk_encode(const std::vector<double>& v, double fraction) {
  if (v.empty()) throw dimension_error("topk_encode: empty vector");
  if (!(fraction > 0.0) || fraction > 1.0)
    throw sim_error("topk fraction must be in (0, 1]");
  for (double x : v)
    if (!std::isfinite(x)) throw sim_error("topk_encode: non-finite coordinate");
  const std::uint32_t dim = static_cast<std::uint32_t>(v.size());
  std::uint32_t k = static_cast<std::uint32_t>(
      std::llround(fraction * static_cast<double>(dim)));
  k = std::max<std::uint32_t>(1, std::min(k, dim));
  std::vector<std::uint32_t> order(dim);
  std::iota(order.begin(), order.end(), 0u);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      const double ma = std::abs(v[a]);
                      const double mb = std::abs(v[b]);
                      if (ma != mb) return ma > mb;
                      return a < b;  // deterministic tie break
                    });
  order.resize(k);
  std::sort(order.begin(), order.end());
  sparse_gradient s;
  s.dim = dim;
  s.idx = std::move(order);
  s.val.reserve(k);
  for (std::uint32_t i : s.idx) s.val.push_back(static_cast<float>(v[i]));
  return s;
}

std::vector<double> topk_decode(const sparse_gradient& s) {
  if (s.dim == 0) throw dimension_error("topk_decode: zero dim");
  if (s.idx.size() != s.val.size())
    throw dimension_error("topk_decode: index/value size mismatch");
  std::vector<double> v(s.dim, 0.0);
  for (std::size_t i = 0; i < s.idx.size(); ++i) {
    if (s.idx[i] >= s.dim) throw data_error("topk_decode: index out of range");
    v[s.idx[i]] = static_cast<double>(s.val[i]);
  }
  return v;
}

std::uint64_t topk_size_bits(std::uint32_t dim, std::uint32_t k) {
  if (dim == 0) throw dimension_error("topk_size_bits: zero dim");
  return static_cast<std::uint64_t>(k) * (32 + index_bits_for_dim(dim));
}

std::vector<std::uint8_t> serialize_sparse(const sparse_gradient& s) {
  if (s.idx.size() != s.val.size())
    throw dimension_error("serialize_sparse: index/value size mismatch");
  std::vector<std::uint8_t> out;
  append_u32(out, s.dim);
  append_u32(out, static_cast<std::uint32_t>(s.idx.size()));
  bit_writer w;
  const int ib = index_bits_for_dim(s.dim);
  for (std::uint32_t i : s.idx) w.put(i, ib);
  const auto idx_payload = w.take();
  out.insert(out.end(), idx_payload.begin(), idx_payload.end());
  for (float v : s.val) append_f32(out, v);
  return out;
}

sparse_gradient deserialize_sparse(const std::vector<std::uint8_t>& bytes) {
  sparse_gradient s;
  s.dim = read_u32(bytes, 0);
  const std::uint32_t k = read_u32(bytes, 4);
  if (s.dim == 0) throw data_error("deserialize_sparse: zero dim");
  if (k > s.dim) throw data_error("deserialize_sparse: k exceeds dim");
  const int ib = index_bits_for_dim(s.dim);
  const std::size_t idx_bytes = (static_cast<std::size_t>(k) * ib + 7) / 8;
  if (bytes.size() < 8 + idx_bytes + 4ull * k)
    throw data_error("deserialize_sparse: truncated");
  bit_reader r(bytes.data() + 8, idx_bytes);
  s.idx.resize(k);
  for (std::uint32_t i = 0; i < k; ++i) s.idx[i] = r.get(ib);
  s.val.resize(k);
  for (std::uint32_t i = 0; i < k; ++i)
    s.val[i] = read_f32(bytes, 8 + idx_bytes + 4ull * i);
  return s;
}

}  // namespace fedq
