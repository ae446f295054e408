#pragma once

#include <string>
#include <vector>

#include "fedq/rng.hpp"

namespace fedq {

struct batch;  // core_ml.hpp

// In-memory dataset: row-major features normalized to [0, 1], integer labels
// in [0, n_classes).
struct dataset {
  int n = 0;
  int dim = 0;
  int n_classes = 0;
  std::vector<double> x;  // n * dim
  std::vector<int> y;     // n
};

// Gaussian blobs: class c's mean sits at (class_sep/sqrt(2)) * e_c so every
// pair of class means is exactly class_sep apart; unit covariance; labels
// assigned round-robin (exactly balanced when n_classes divides n_samples).
// Features are min-max normalized per column afterwards. Requires
// input_dim >= n_classes.
dataset generate_synthetic(int n_samples, int input_dim, int n_classes,
                           double class_sep, rng_stream& rng);

// IDX image/label pair (the common big-endian u8 tensor format). Pixels are
// scaled by 1/255. Validates magic numbers, dimension counts and that both
// files agree on the number of records.
dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Numeric CSV. label_column is a 0-based column index; the remaining columns
// become features, min-max normalized per column (constant columns map to 0).
// Labels must be integers in [0, max_label]; n_classes = max_label + 1.
// Parse errors name the row and column.
dataset load_csv(const std::string& path, int label_column, bool has_header);

// Copy the given rows into a dense batch.
batch gather(const dataset& d, const std::vector<int>& rows);

}  // namespace fedq
