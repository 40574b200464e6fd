#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mbpa/error.hpp"

namespace mbpa {

enum class TaskKind { classification, regression };

struct MemoryEntry {
  std::vector<double> key;
  double value = 0.0;  // class id (integer-valued) or regression target
  std::uint64_t insert_index = 0;
};

struct ContextItem {
  std::vector<double> key;
  double value = 0.0;
  double weight = 0.0;  // normalized; all weights in a context sum to 1
  std::uint64_t insert_index = 0;
  double distance_sq = 0.0;
};

// The K retrieved neighbours of one query, the unit of local adaptation.
struct Context {
  TaskKind kind = TaskKind::classification;
  std::vector<double> query;
  std::vector<ContextItem> items;

  bool empty() const { return items.empty(); }
  std::size_t size() const { return items.size(); }
};

// Fixed-capacity circular key-value store with exact kNN retrieval under
// Euclidean distance and inverse-quadratic kernel weighting
// kern(h, q) = 1 / (epsilon + |h - q|^2).
//
// Capacity 0 is the disabled store: appends are dropped, size stays 0.
//
// Thread contract: many concurrent readers or one writer. Lookups during an
// append are not synchronized here; callers keep the phases separate.
class EpisodicMemory {
 public:
  EpisodicMemory(std::size_t capacity, std::size_t key_dim, double epsilon,
                 TaskKind kind = TaskKind::classification);

  void append(std::span<const double> key, double value);

  // Exact k nearest stored entries; ties broken by smaller insert index.
  // Returns min(k, size()) items with weights renormalized to sum to 1.
  Context lookup(std::span<const double> query, std::size_t k) const;

  std::size_t size() const { return count_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t key_dim() const { return key_dim_; }
  double epsilon() const { return epsilon_; }
  TaskKind kind() const { return kind_; }
  std::uint64_t total_appends() const { return next_index_; }

  // Entry by age: ordinal 0 is the oldest surviving entry.
  const MemoryEntry& entry(std::size_t ordinal) const;

  // Restores a persisted entry (used by the deserializer).
  void restore_entry(MemoryEntry e);

 private:
  std::size_t capacity_;
  std::size_t key_dim_;
  double epsilon_;
  TaskKind kind_;
  std::vector<MemoryEntry> slots_;
  std::size_t count_ = 0;
  std::uint64_t next_index_ = 0;
};

// Independent retrieval oracle: full sort over all entries instead of the
// bounded selection used by lookup. Same contract, same tie rule.
Context brute_force_knn(const EpisodicMemory& mem, std::span<const double> query, std::size_t k);

// K entries drawn uniformly at random (without replacement) with uniform
// weights; the naive replay alternative to contextual retrieval.
Context uniform_random_context(const EpisodicMemory& mem, std::size_t k, std::mt19937_64& rng);

// Kernel weights for a set of squared distances: raw 1/(eps+d2), normalized
// to sum to 1. Exact zero raw denominators take the indicator limit.
std::vector<double> kernel_weights(std::span<const double> distances_sq, double epsilon);

}  // namespace mbpa
