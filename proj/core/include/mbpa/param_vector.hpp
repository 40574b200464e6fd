#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "mbpa/error.hpp"

namespace mbpa {

// Per-coordinate parameter-subset mask; size always equals the flat
// parameter count of the network it belongs to.
using Mask = std::vector<std::uint8_t>;

enum class TensorKind : std::uint32_t { weight = 0, bias = 1 };

struct LayoutEntry {
  std::uint32_t layer = 0;
  TensorKind kind = TensorKind::weight;
  std::uint64_t rows = 0;
  std::uint64_t cols = 1;  // 1 for bias vectors
  std::uint64_t offset = 0;
  std::uint64_t size() const { return rows * cols; }
};

// Ordered map from flat parameter ranges to layer tensors. Immutable after
// construction; offsets are assigned sequentially.
class ParamLayout {
 public:
  explicit ParamLayout(std::vector<LayoutEntry> entries) : entries_(std::move(entries)) {
    std::uint64_t off = 0;
    for (auto& e : entries_) {
      e.offset = off;
      off += e.size();
    }
    total_ = off;
  }

  const std::vector<LayoutEntry>& entries() const { return entries_; }
  std::uint64_t total_size() const { return total_; }

 private:
  std::vector<LayoutEntry> entries_;
  std::uint64_t total_ = 0;
};

// Flat parameter vector plus a shared, immutable layout.
struct ParamVector {
  std::vector<double> values;
  std::shared_ptr<const ParamLayout> layout;

  std::size_t size() const { return values.size(); }

  void check_consistent() const {
    if (layout && layout->total_size() != values.size())
      throw ShapeError("ParamVector: layout size does not match value count");
  }
};

}  // namespace mbpa
