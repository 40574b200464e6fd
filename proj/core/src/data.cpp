#include "mbpa/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "mbpa/rng.hpp"

namespace mbpa {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t off,
                        const std::filesystem::path& path) {
  if (off + 4 > buf.size()) throw FormatError("truncated IDX file: " + path.string());
  return (static_cast<std::uint32_t>(buf[off]) << 24) |
         (static_cast<std::uint32_t>(buf[off + 1]) << 16) |
         (static_cast<std::uint32_t>(buf[off + 2]) << 8) |
         static_cast<std::uint32_t>(buf[off + 3]);
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  auto img = read_file(images_path);
  auto lab = read_file(labels_path);

  std::uint32_t img_magic = read_be32(img, 0, images_path);
  if (img_magic != kImagesMagic)
    throw FormatError("bad magic in image file " + images_path.string() + ": expected 0x803");
  std::uint32_t n_images = read_be32(img, 4, images_path);
  std::uint32_t rows = read_be32(img, 8, images_path);
  std::uint32_t cols = read_be32(img, 12, images_path);
  std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  if (img.size() != 16 + static_cast<std::size_t>(n_images) * pixels)
    throw FormatError("truncated IDX file: " + images_path.string());

  std::uint32_t lab_magic = read_be32(lab, 0, labels_path);
  if (lab_magic != kLabelsMagic)
    throw FormatError("bad magic in label file " + labels_path.string() + ": expected 0x801");
  std::uint32_t n_labels = read_be32(lab, 4, labels_path);
  if (lab.size() != 8 + static_cast<std::size_t>(n_labels))
    throw FormatError("truncated IDX file: " + labels_path.string());

  if (n_images != n_labels)
    throw FormatError("image/label count mismatch: " + std::to_string(n_images) + " vs " +
                      std::to_string(n_labels));

  LabeledDataset ds;
  ds.kind = TaskKind::classification;
  ds.dim = pixels;
  ds.inputs.resize(static_cast<std::size_t>(n_images) * pixels);
  ds.targets.resize(n_images);
  std::int64_t max_label = 0;
  for (std::size_t i = 0; i < n_images; ++i) {
    for (std::size_t p = 0; p < pixels; ++p)
      ds.inputs[i * pixels + p] = static_cast<double>(img[16 + i * pixels + p]) / 255.0;
    ds.targets[i] = static_cast<double>(lab[8 + i]);
    max_label = std::max(max_label, static_cast<std::int64_t>(lab[8 + i]));
  }
  ds.num_classes = max_label + 1;
  return ds;
}

LabeledDataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.sigma < 0.0) throw Error("gen_synthetic: sigma must be nonnegative");
  auto rng = make_rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  LabeledDataset ds;
  if (spec.kind == SyntheticSpec::Kind::regression_1d) {
    ds.kind = TaskKind::regression;
    ds.dim = 1;
    ds.num_classes = 0;
    std::uniform_real_distribution<double> ux(-2.0, 2.0);
    for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
      double x = ux(rng);
      double y = std::sin(3.0 * x) + spec.sigma * normal(rng);
      ds.push(std::span<const double>(&x, 1), y);
    }
    return ds;
  }

  if (spec.dim == 0 || spec.classes <= 0) throw Error("gen_synthetic: invalid spec");
  ds.kind = TaskKind::classification;
  ds.dim = spec.dim;
  ds.num_classes = spec.classes;

  // Class means on the unit sphere.
  std::vector<std::vector<double>> means(static_cast<std::size_t>(spec.classes));
  for (auto& m : means) {
    m.resize(spec.dim);
    double norm = 0.0;
    for (double& v : m) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) norm = 1.0;
    for (double& v : m) v /= norm;
  }

  std::vector<double> x(spec.dim);
  for (std::int64_t c = 0; c < spec.classes; ++c) {
    const auto& m = means[static_cast<std::size_t>(c)];
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      for (std::size_t j = 0; j < spec.dim; ++j) x[j] = m[j] + spec.sigma * normal(rng);
      ds.push(x, static_cast<double>(c));
    }
  }
  return ds;
}

std::vector<std::size_t> make_permutation(std::size_t dim, std::uint64_t seed) {
  std::vector<std::size_t> perm(dim);
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = make_rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t j = 0; j < perm.size(); ++j) inv[perm[j]] = j;
  return inv;
}

LabeledDataset apply_permutation(const LabeledDataset& ds, std::span<const std::size_t> perm) {
  if (perm.size() != ds.dim) throw ShapeError("apply_permutation: size mismatch");
  LabeledDataset out;
  out.kind = ds.kind;
  out.dim = ds.dim;
  out.num_classes = ds.num_classes;
  out.targets = ds.targets;
  out.inputs.resize(ds.inputs.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double* src = ds.inputs.data() + i * ds.dim;
    double* dst = out.inputs.data() + i * ds.dim;
    for (std::size_t j = 0; j < ds.dim; ++j) dst[j] = src[perm[j]];
  }
  return out;
}

LabeledDataset permute_pixels(const LabeledDataset& ds, std::uint64_t perm_seed) {
  return apply_permutation(ds, make_permutation(ds.dim, perm_seed));
}

LabeledDataset subsample_classes(const LabeledDataset& ds, std::span<const double> fractions,
                                 std::uint64_t seed) {
  if (ds.kind != TaskKind::classification)
    throw Error("subsample_classes: classification dataset required");
  if (fractions.size() != static_cast<std::size_t>(ds.num_classes))
    throw ShapeError("subsample_classes: one fraction per class required");
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) throw Error("subsample_classes: fraction outside (0, 1]");

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i)
    by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);

  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    std::size_t keep = static_cast<std::size_t>(
        std::ceil(fractions[c] * static_cast<double>(idx.size())));
    keep = std::min(keep, idx.size());
    auto rng = make_rng(derive_seed(seed, c));
    std::shuffle(idx.begin(), idx.end(), rng);
    kept.insert(kept.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(kept.begin(), kept.end());

  LabeledDataset out;
  out.kind = ds.kind;
  out.dim = ds.dim;
  out.num_classes = ds.num_classes;
  for (std::size_t i : kept) out.push(ds.input(i), ds.targets[i]);
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& ds,
                                                        std::size_t n_first, std::uint64_t seed) {
  if (n_first > ds.size()) throw Error("split_dataset: split larger than dataset");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  LabeledDataset a, b;
  for (LabeledDataset* part : {&a, &b}) {
    part->kind = ds.kind;
    part->dim = ds.dim;
    part->num_classes = ds.num_classes;
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    LabeledDataset& part = i < n_first ? a : b;
    part.push(ds.input(order[i]), ds.targets[order[i]]);
  }
  return {std::move(a), std::move(b)};
}

LabeledDataset filter_classes(const LabeledDataset& ds, std::span<const std::int64_t> classes) {
  std::set<std::int64_t> keep(classes.begin(), classes.end());
  LabeledDataset out;
  out.kind = ds.kind;
  out.dim = ds.dim;
  out.num_classes = ds.num_classes;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (keep.count(ds.label(i))) out.push(ds.input(i), ds.targets[i]);
  return out;
}

}  // namespace mbpa
