#include "mbpa/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace mbpa {

namespace {

constexpr std::uint32_t kParamVersion = 1;
constexpr std::uint32_t kMemoryVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot open file for writing: " + path.string());
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void magic(const char m[4]) { bytes(m, 4); }
  void close() {
    out_.close();
    if (!out_) throw Error("write failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw Error("cannot open file for reading: " + path.string());
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("truncated file");
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void expect_magic(const char m[4], const char* what) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, m, 4) != 0) throw FormatError(std::string("bad magic for ") + what);
  }

 private:
  std::ifstream in_;
};

}  // namespace

void save_params(const ParamVector& params, const std::filesystem::path& path) {
  params.check_consistent();
  Writer w(path);
  w.magic("MBPA");
  w.u32(kParamVersion);
  const auto& entries = params.layout ? params.layout->entries() : std::vector<LayoutEntry>{};
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w.u32(e.layer);
    w.u32(static_cast<std::uint32_t>(e.kind));
    w.u64(e.rows);
    w.u64(e.cols);
  }
  w.u64(params.values.size());
  for (double v : params.values) w.f64(v);
  w.close();
}

ParamVector load_params(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic("MBPA", "parameter file");
  std::uint32_t version = r.u32();
  if (version != kParamVersion) throw FormatError("unsupported parameter file version");
  std::uint32_t n_entries = r.u32();
  std::vector<LayoutEntry> entries(n_entries);
  for (auto& e : entries) {
    e.layer = r.u32();
    e.kind = static_cast<TensorKind>(r.u32());
    e.rows = r.u64();
    e.cols = r.u64();
  }
  ParamVector pv;
  pv.layout = std::make_shared<const ParamLayout>(std::move(entries));
  std::uint64_t count = r.u64();
  if (count != pv.layout->total_size())
    throw FormatError("parameter count does not match layout descriptor");
  pv.values.resize(count);
  for (auto& v : pv.values) v = r.f64();
  return pv;
}

void save_memory(const EpisodicMemory& mem, const std::filesystem::path& path) {
  Writer w(path);
  w.magic("MBPM");
  w.u32(kMemoryVersion);
  w.u64(mem.key_dim());
  w.u64(mem.capacity());
  w.u64(mem.size());
  w.f64(mem.epsilon());
  w.u32(mem.kind() == TaskKind::classification ? 0 : 1);
  for (std::size_t ord = 0; ord < mem.size(); ++ord) {
    const MemoryEntry& e = mem.entry(ord);
    for (double x : e.key) w.f64(x);
    if (mem.kind() == TaskKind::classification)
      w.i64(static_cast<std::int64_t>(std::llround(e.value)));
    else
      w.f64(e.value);
    w.u64(e.insert_index);
  }
  w.close();
}

EpisodicMemory load_memory(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic("MBPM", "memory file");
  std::uint32_t version = r.u32();
  if (version != kMemoryVersion) throw FormatError("unsupported memory file version");
  std::uint64_t key_dim = r.u64();
  std::uint64_t capacity = r.u64();
  std::uint64_t count = r.u64();
  double epsilon = r.f64();
  std::uint32_t kind_tag = r.u32();
  if (kind_tag > 1) throw FormatError("unknown task kind in memory file");
  if (count > capacity) throw FormatError("memory count exceeds capacity");
  TaskKind kind = kind_tag == 0 ? TaskKind::classification : TaskKind::regression;
  EpisodicMemory mem(static_cast<std::size_t>(capacity), static_cast<std::size_t>(key_dim),
                     epsilon, kind);
  for (std::uint64_t i = 0; i < count; ++i) {
    MemoryEntry e;
    e.key.resize(key_dim);
    for (auto& x : e.key) x = r.f64();
    e.value = kind == TaskKind::classification ? static_cast<double>(r.i64()) : r.f64();
    e.insert_index = r.u64();
    mem.restore_entry(std::move(e));
  }
  return mem;
}

}  // namespace mbpa
