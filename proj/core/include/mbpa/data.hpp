#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mbpa/error.hpp"
#include "mbpa/memory.hpp"

namespace mbpa {

// Immutable after construction; freely shared across workers.
struct LabeledDataset {
  TaskKind kind = TaskKind::classification;
  std::size_t dim = 0;
  std::int64_t num_classes = 0;       // classification only
  std::vector<double> inputs;         // row-major, size() * dim
  std::vector<double> targets;        // class ids (integer-valued) or scalars

  std::size_t size() const { return targets.size(); }
  std::span<const double> input(std::size_t i) const {
    return {inputs.data() + i * dim, dim};
  }
  std::int64_t label(std::size_t i) const {
    return static_cast<std::int64_t>(targets[i]);
  }
  void push(std::span<const double> x, double target) {
    inputs.insert(inputs.end(), x.begin(), x.end());
    targets.push_back(target);
  }
};

struct SyntheticSpec {
  enum class Kind { gaussian_clusters, regression_1d };
  Kind kind = Kind::gaussian_clusters;
  std::size_t dim = 32;
  std::int64_t classes = 10;
  std::size_t samples_per_class = 300;  // regression_1d: total sample count
  double sigma = 0.25;
  std::uint64_t seed = 1;
};

// IDX files per the MNIST convention: big-endian u32 header fields, magic
// 0x00000803 (images) / 0x00000801 (labels), then raw bytes. Pixels are
// scaled to [0, 1].
LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);

// gaussian_clusters: class means drawn on the unit sphere, points
// N(mean, sigma^2 I), grouped by class. regression_1d: y = sin(3x) + noise,
// x uniform on [-2, 2].
LabeledDataset gen_synthetic(const SyntheticSpec& spec);

std::vector<std::size_t> make_permutation(std::size_t dim, std::uint64_t seed);
std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> perm);

// Output column j takes input column perm[j]; targets unchanged.
LabeledDataset apply_permutation(const LabeledDataset& ds, std::span<const std::size_t> perm);
LabeledDataset permute_pixels(const LabeledDataset& ds, std::uint64_t perm_seed);

// Keeps ceil(fraction * class_count) seeded examples per class; original
// relative order preserved. Fractions must lie in (0, 1].
LabeledDataset subsample_classes(const LabeledDataset& ds, std::span<const double> fractions,
                                 std::uint64_t seed);

// Seeded shuffle, then the first n_first examples and the rest.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& ds,
                                                        std::size_t n_first, std::uint64_t seed);

// Examples whose label lies in `classes`.
LabeledDataset filter_classes(const LabeledDataset& ds, std::span<const std::int64_t> classes);

}  // namespace mbpa
