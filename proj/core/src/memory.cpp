#include "mbpa/memory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mbpa {

namespace {

double distance_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

}  // namespace

std::vector<double> kernel_weights(std::span<const double> distances_sq, double epsilon) {
  std::vector<double> w(distances_sq.size());
  bool has_inf = false;
  for (std::size_t i = 0; i < w.size(); ++i) {
    double denom = epsilon + distances_sq[i];
    if (denom == 0.0) {
      has_inf = true;
      w[i] = std::numeric_limits<double>::infinity();
    } else {
      w[i] = 1.0 / denom;
    }
  }
  if (has_inf) {
    // Limit of the kernel as the denominator -> 0: mass concentrates on the
    // zero-distance entries.
    double n_inf = 0.0;
    for (double x : w) n_inf += std::isinf(x) ? 1.0 : 0.0;
    for (double& x : w) x = std::isinf(x) ? 1.0 / n_inf : 0.0;
    return w;
  }
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

EpisodicMemory::EpisodicMemory(std::size_t capacity, std::size_t key_dim, double epsilon,
                               TaskKind kind)
    : capacity_(capacity), key_dim_(key_dim), epsilon_(epsilon), kind_(kind) {
  if (key_dim_ == 0) throw ShapeError("EpisodicMemory: key dimension must be positive");
  if (epsilon_ < 0.0) throw Error("EpisodicMemory: epsilon must be nonnegative");
  slots_.resize(capacity_);
}

void EpisodicMemory::append(std::span<const double> key, double value) {
  if (key.size() != key_dim_) throw ShapeError("append: key dimension mismatch");
  if (capacity_ == 0) {
    ++next_index_;
    return;
  }
  std::size_t slot = static_cast<std::size_t>(next_index_ % capacity_);
  MemoryEntry& e = slots_[slot];
  e.key.assign(key.begin(), key.end());
  e.value = value;
  e.insert_index = next_index_;
  ++next_index_;
  if (count_ < capacity_) ++count_;
}

const MemoryEntry& EpisodicMemory::entry(std::size_t ordinal) const {
  if (ordinal >= count_) throw Error("entry: ordinal out of range");
  std::size_t first = count_ < capacity_ ? 0 : static_cast<std::size_t>(next_index_ % capacity_);
  return slots_[(first + ordinal) % capacity_];
}

void EpisodicMemory::restore_entry(MemoryEntry e) {
  if (e.key.size() != key_dim_) throw ShapeError("restore_entry: key dimension mismatch");
  if (capacity_ == 0) return;
  std::size_t slot = static_cast<std::size_t>(e.insert_index % capacity_);
  next_index_ = std::max(next_index_, e.insert_index + 1);
  slots_[slot] = std::move(e);
  if (count_ < capacity_) ++count_;
}

Context EpisodicMemory::lookup(std::span<const double> query, std::size_t k) const {
  if (query.size() != key_dim_) throw ShapeError("lookup: query dimension mismatch");
  if (count_ == 0) throw EmptyMemoryError("lookup: memory is empty");
  if (k == 0) throw Error("lookup: k must be at least 1");

  struct Cand {
    double d2;
    std::uint64_t insert_index;
    std::size_t ordinal;
  };
  auto worse = [](const Cand& a, const Cand& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    return a.insert_index < b.insert_index;  // larger index is worse on a tie
  };

  std::size_t take = std::min(k, count_);
  // Bounded selection: max-heap of the current best `take` candidates.
  std::vector<Cand> heap;
  heap.reserve(take);
  for (std::size_t ord = 0; ord < count_; ++ord) {
    const MemoryEntry& e = entry(ord);
    Cand c{distance_sq(e.key, query), e.insert_index, ord};
    if (heap.size() < take) {
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end(), worse);
    } else if (worse(c, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), worse);
      heap.back() = c;
      std::push_heap(heap.begin(), heap.end(), worse);
    }
  }
  std::sort_heap(heap.begin(), heap.end(), worse);

  Context ctx;
  ctx.kind = kind_;
  ctx.query.assign(query.begin(), query.end());
  std::vector<double> d2(heap.size());
  for (std::size_t i = 0; i < heap.size(); ++i) d2[i] = heap[i].d2;
  std::vector<double> w = kernel_weights(d2, epsilon_);
  ctx.items.resize(heap.size());
  for (std::size_t i = 0; i < heap.size(); ++i) {
    const MemoryEntry& e = entry(heap[i].ordinal);
    ctx.items[i].key = e.key;
    ctx.items[i].value = e.value;
    ctx.items[i].weight = w[i];
    ctx.items[i].insert_index = e.insert_index;
    ctx.items[i].distance_sq = heap[i].d2;
  }
  return ctx;
}

Context brute_force_knn(const EpisodicMemory& mem, std::span<const double> query, std::size_t k) {
  if (query.size() != mem.key_dim()) throw ShapeError("brute_force_knn: query dimension mismatch");
  if (mem.size() == 0) throw EmptyMemoryError("brute_force_knn: memory is empty");
  if (k == 0) throw Error("brute_force_knn: k must be at least 1");

  std::size_t n = mem.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> d2(n);
  for (std::size_t ord = 0; ord < n; ++ord) {
    const auto& key = mem.entry(ord).key;
    double s = 0.0;
    for (std::size_t j = 0; j < key.size(); ++j) s += (key[j] - query[j]) * (key[j] - query[j]);
    d2[ord] = s;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (d2[a] != d2[b]) return d2[a] < d2[b];
    return mem.entry(a).insert_index < mem.entry(b).insert_index;
  });
  order.resize(std::min(k, n));

  std::vector<double> taken_d2(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) taken_d2[i] = d2[order[i]];
  std::vector<double> w = kernel_weights(taken_d2, mem.epsilon());

  Context ctx;
  ctx.kind = mem.kind();
  ctx.query.assign(query.begin(), query.end());
  ctx.items.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const MemoryEntry& e = mem.entry(order[i]);
    ctx.items[i] = {e.key, e.value, w[i], e.insert_index, taken_d2[i]};
  }
  return ctx;
}

Context uniform_random_context(const EpisodicMemory& mem, std::size_t k, std::mt19937_64& rng) {
  if (mem.size() == 0) throw EmptyMemoryError("uniform_random_context: memory is empty");
  if (k == 0) throw Error("uniform_random_context: k must be at least 1");

  std::size_t n = mem.size();
  std::size_t take = std::min(k, n);
  // Partial Fisher-Yates over the ordinal range.
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> dist(i, n - 1);
    std::swap(pool[i], pool[dist(rng)]);
  }

  Context ctx;
  ctx.kind = mem.kind();
  double w = 1.0 / static_cast<double>(take);
  ctx.items.resize(take);
  for (std::size_t i = 0; i < take; ++i) {
    const MemoryEntry& e = mem.entry(pool[i]);
    ctx.items[i] = {e.key, e.value, w, e.insert_index, 0.0};
  }
  return ctx;
}

}  // namespace mbpa
