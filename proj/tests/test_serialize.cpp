#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "mbpa/net.hpp"
#include "mbpa/rng.hpp"
#include "mbpa/serialize.hpp"

using namespace mbpa;

namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("mbpa-ser-" + name);
}

}  // namespace

TEST_SUITE("serialize") {

TEST_CASE("parameters round-trip bit-exactly with their layout") {
  OutputNet net = OutputNet::make_mlp(5, {7}, 3, HeadKind::softmax, Activation::relu, 88);
  auto path = temp_file("params.bin");
  save_params(net.params(), path);
  ParamVector loaded = load_params(path);
  REQUIRE(loaded.values.size() == net.params().values.size());
  CHECK(std::memcmp(loaded.values.data(), net.params().values.data(),
                    loaded.values.size() * sizeof(double)) == 0);
  REQUIRE(loaded.layout);
  CHECK(loaded.layout->entries().size() == net.params().layout->entries().size());
  for (std::size_t i = 0; i < loaded.layout->entries().size(); ++i) {
    const auto& a = loaded.layout->entries()[i];
    const auto& b = net.params().layout->entries()[i];
    CHECK(a.layer == b.layer);
    CHECK(a.kind == b.kind);
    CHECK(a.rows == b.rows);
    CHECK(a.cols == b.cols);
    CHECK(a.offset == b.offset);
  }
  fs::remove(path);
}

TEST_CASE("parameter file magic starts with MBPA") {
  OutputNet net = OutputNet::make_mlp(2, {}, 2, HeadKind::softmax, Activation::relu, 1);
  auto path = temp_file("magic.bin");
  save_params(net.params(), path);
  std::ifstream in(path, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::memcmp(magic, "MBPA", 4) == 0);
  fs::remove(path);
}

TEST_CASE("memory round-trips and serves identical lookups") {
  auto rng = make_rng(17);
  std::normal_distribution<double> normal(0.0, 1.0);
  EpisodicMemory mem(6, 3, 2.5e-3);
  std::vector<double> key(3);
  for (int i = 0; i < 9; ++i) {  // wraps once
    for (double& x : key) x = normal(rng);
    mem.append(key, static_cast<double>(i % 4));
  }
  auto path = temp_file("memory.bin");
  save_memory(mem, path);
  EpisodicMemory loaded = load_memory(path);
  CHECK(loaded.capacity() == mem.capacity());
  CHECK(loaded.size() == mem.size());
  CHECK(loaded.epsilon() == mem.epsilon());
  CHECK(loaded.kind() == mem.kind());

  std::vector<double> q(3);
  for (int trial = 0; trial < 20; ++trial) {
    for (double& x : q) x = normal(rng);
    Context a = mem.lookup(q, 4);
    Context b = loaded.lookup(q, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.items[i].insert_index == b.items[i].insert_index);
      CHECK(a.items[i].weight == b.items[i].weight);
      CHECK(a.items[i].value == b.items[i].value);
    }
  }
  fs::remove(path);
}

TEST_CASE("regression values survive as doubles") {
  EpisodicMemory mem(4, 1, 1e-3, TaskKind::regression);
  double key = 0.5;
  mem.append(std::span<const double>(&key, 1), -0.12345678901234567);
  auto path = temp_file("memreg.bin");
  save_memory(mem, path);
  EpisodicMemory loaded = load_memory(path);
  CHECK(loaded.entry(0).value == -0.12345678901234567);
  fs::remove(path);
}

TEST_CASE("wrong magic and truncation are distinct format errors") {
  auto path = temp_file("junk.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  try {
    load_params(path);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("magic") != std::string::npos);
  }
  {
    std::ofstream out(path, std::ios::binary);
    out << "MB";  // not even a full magic
  }
  try {
    load_params(path);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
  fs::remove(path);
}

}  // TEST_SUITE
