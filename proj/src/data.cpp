#include "fedq/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

#include "fedq/core_ml.hpp"
#include "fedq/errors.hpp"

namespace fedq {

namespace {

// Min-max normalize each column to [0, 1]; constant columns map to 0.
void normalize_columns(dataset& d) {
  for (int c = 0; c < d.dim; ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < d.n; ++i) {
      const double v = d.x[static_cast<std::size_t>(i) * d.dim + c];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double span = hi - lo;
    for (int i = 0; i < d.n; ++i) {
      double& v = d.x[static_cast<std::size_t>(i) * d.dim + c];
      v = span > 0.0 ? (v - lo) / span : 0.0;
    }
  }
}

std::uint32_t read_be32(std::istream& in, const std::string& path,
                        const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw data_error(path + ": truncated while reading " + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

dataset generate_synthetic(int n_samples, int input_dim, int n_classes,
                           double class_sep, rng_stream& rng) {
  if (n_samples <= 0 || input_dim <= 0 || n_classes < 2)
    throw config_error("synthetic dataset needs n_samples > 0, input_dim > 0, n_classes >= 2");
  if (input_dim < n_classes)
    throw config_error("synthetic dataset needs input_dim >= n_classes (one mean axis per class)");
  if (class_sep < 0.0) throw config_error("class_sep must be >= 0");
  dataset d;
  d.n = n_samples;
  d.dim = input_dim;
  d.n_classes = n_classes;
  d.x.resize(static_cast<std::size_t>(n_samples) * input_dim);
  d.y.resize(static_cast<std::size_t>(n_samples));
  // Placing class c's mean at (sep/sqrt(2)) e_c makes all pairwise mean
  // distances exactly class_sep.
  const double mean_coord = class_sep / std::sqrt(2.0);
  for (int i = 0; i < n_samples; ++i) {
    const int c = i % n_classes;
    d.y[static_cast<std::size_t>(i)] = c;
    double* row = d.x.data() + static_cast<std::size_t>(i) * input_dim;
    for (int k = 0; k < input_dim; ++k) row[k] = rng.normal();
    row[c] += mean_coord;
  }
  normalize_columns(d);
  return d;
}

dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream fi(images_path, std::ios::binary);
  if (!fi) throw data_error(images_path + ": cannot open");
  std::ifstream fl(labels_path, std::ios::binary);
  if (!fl) throw data_error(labels_path + ": cannot open");

  const std::uint32_t imagic = read_be32(fi, images_path, "magic");
  if (imagic != 0x00000803u)
    throw data_error(images_path + ": bad image magic (expected 0x803)");
  const std::uint32_t n_img = read_be32(fi, images_path, "count");
  const std::uint32_t rows = read_be32(fi, images_path, "rows");
  const std::uint32_t cols = read_be32(fi, images_path, "cols");

  const std::uint32_t lmagic = read_be32(fl, labels_path, "magic");
  if (lmagic != 0x00000801u)
    throw data_error(labels_path + ": bad label magic (expected 0x801)");
  const std::uint32_t n_lab = read_be32(fl, labels_path, "count");
  if (n_img != n_lab)
    throw data_error("IDX pair disagrees on record count: " +
                     std::to_string(n_img) + " images vs " +
                     std::to_string(n_lab) + " labels");
  if (n_img == 0) throw data_error(images_path + ": zero records");

  dataset d;
  d.n = static_cast<int>(n_img);
  d.dim = static_cast<int>(rows * cols);
  if (d.dim <= 0) throw data_error(images_path + ": zero-sized images");
  d.x.resize(static_cast<std::size_t>(d.n) * d.dim);
  d.y.resize(static_cast<std::size_t>(d.n));

  std::vector<unsigned char> buf(static_cast<std::size_t>(d.dim));
  for (int i = 0; i < d.n; ++i) {
    if (!fi.read(reinterpret_cast<char*>(buf.data()), d.dim))
      throw data_error(images_path + ": truncated at image " + std::to_string(i));
    double* row = d.x.data() + static_cast<std::size_t>(i) * d.dim;
    for (int k = 0; k < d.dim; ++k) row[k] = buf[static_cast<std::size_t>(k)] / 255.0;
  }
  int max_label = 0;
  for (int i = 0; i < d.n; ++i) {
    unsigned char lab;
    if (!fl.read(reinterpret_cast<char*>(&lab), 1))
      throw data_error(labels_path + ": truncated at label " + std::to_string(i));
    d.y[static_cast<std::size_t>(i)] = lab;
    max_label = std::max(max_label, static_cast<int>(lab));
  }
  d.n_classes = max_label + 1;
  if (d.n_classes < 2) throw data_error(labels_path + ": fewer than 2 classes");
  return d;
}

dataset load_csv(const std::string& path, int label_column, bool has_header) {
  std::ifstream f(path);
  if (!f) throw data_error(path + ": cannot open");
  std::string line;
  int lineno = 0;
  if (has_header) {
    if (!std::getline(f, line)) throw data_error(path + ": empty file");
    ++lineno;
  }
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  int n_cols = -1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      std::size_t pos = 0;
      double v;
      try {
        v = std::stod(cell, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != cell.size())
        throw data_error(path + ": row " + std::to_string(lineno) + ", column " +
                         std::to_string(vals.size()) + ": cannot parse '" +
                         cell + "' as a number");
      vals.push_back(v);
    }
    if (n_cols < 0) {
      n_cols = static_cast<int>(vals.size());
      if (label_column < 0 || label_column >= n_cols)
        throw data_error(path + ": label column " + std::to_string(label_column) +
                         " outside 0.." + std::to_string(n_cols - 1));
    } else if (static_cast<int>(vals.size()) != n_cols) {
      throw data_error(path + ": row " + std::to_string(lineno) + " has " +
                       std::to_string(vals.size()) + " columns, expected " +
                       std::to_string(n_cols));
    }
    const double raw = vals[static_cast<std::size_t>(label_column)];
    const double rounded = std::nearbyint(raw);
    if (std::abs(raw - rounded) > 1e-9 || rounded < 0)
      throw data_error(path + ": row " + std::to_string(lineno) + ", column " +
                       std::to_string(label_column) +
                       ": label must be a nonnegative integer, got '" +
                       std::to_string(raw) + "'");
    labels.push_back(static_cast<int>(rounded));
    vals.erase(vals.begin() + label_column);
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw data_error(path + ": no data rows");
  dataset d;
  d.n = static_cast<int>(rows.size());
  d.dim = n_cols - 1;
  if (d.dim <= 0) throw data_error(path + ": no feature columns");
  d.x.resize(static_cast<std::size_t>(d.n) * d.dim);
  d.y = std::move(labels);
  for (int i = 0; i < d.n; ++i)
    std::copy(rows[static_cast<std::size_t>(i)].begin(),
              rows[static_cast<std::size_t>(i)].end(),
              d.x.begin() + static_cast<std::size_t>(i) * d.dim);
  int max_label = 0;
  for (int y : d.y) max_label = std::max(max_label, y);
  d.n_classes = max_label + 1;
  if (d.n_classes < 2) throw data_error(path + ": fewer than 2 classes");
  normalize_columns(d);
  return d;
}

batch gather(const dataset& d, const std::vector<int>& rows) {
  if (rows.empty()) throw dimension_error("gather: empty row set");
  batch b;
  b.n = static_cast<int>(rows.size());
  b.dim = d.dim;
  b.x.resize(static_cast<std::size_t>(b.n) * b.dim);
  b.y.resize(static_cast<std::size_t>(b.n));
  for (int i = 0; i < b.n; ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= d.n) throw dimension_error("gather: row index out of range");
    std::copy(d.x.begin() + static_cast<std::size_t>(r) * d.dim,
              d.x.begin() + static_cast<std::size_t>(r + 1) * d.dim,
              b.x.begin() + static_cast<std::size_t>(i) * d.dim);
    b.y[static_cast<std::size_t>(i)] = d.y[static_cast<std::size_t>(r)];
  }
  return b;
}

}  // namespace fedq
