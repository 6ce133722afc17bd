#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "orchkit/digest.hpp"
#include "orchkit/rng.hpp"

using orchkit::bench::DeterministicRng;

namespace {

std::vector<std::uint64_t> first3(std::uint64_t seed) {
  DeterministicRng rng(seed);
  return {rng.next_u64(), rng.next_u64(), rng.next_u64()};
}

}  // namespace

// reference values evaluated independently of this code base
TEST_CASE("splitmix64 frozen vectors") {
  CHECK(first3(0) == std::vector<std::uint64_t>{0xe220a8397b1dcdafULL, 0x6e789e6aa1b965f4ULL, 0x06c45d188009454fULL});
  CHECK(first3(42) == std::vector<std::uint64_t>{0xbdd732262feb6e95ULL, 0x28efe333b266f103ULL, 0x47526757130f9f52ULL});
  CHECK(first3(1) == std::vector<std::uint64_t>{0x910a2dec89025cc1ULL, 0xbeeb8da1658eec67ULL, 0xf893a2eefb32555eULL});
  CHECK(first3(UINT64_MAX) ==
        std::vector<std::uint64_t>{0xe4d971771b652c20ULL, 0xe99ff867dbf682c9ULL, 0x382ff84cb27281e9ULL});
}

TEST_CASE("shuffle frozen vector, seed 42") {
  DeterministicRng rng(42);
  std::vector<int> v = {0, 1, 2, 3, 4};
  orchkit::bench::shuffle(rng, v);
  CHECK(v == std::vector<int>{1, 2, 0, 4, 3});
}

TEST_CASE("shuffle degenerate inputs") {
  DeterministicRng rng(7);
  std::vector<int> empty;
  orchkit::bench::shuffle(rng, empty);
  CHECK(empty.empty());
  std::vector<int> one = {9};
  orchkit::bench::shuffle(rng, one);
  CHECK(one == std::vector<int>{9});
  // nothing consumed for n < 2
  CHECK(rng.state() == DeterministicRng(7).state());
}

TEST_CASE("shuffle is a deterministic permutation") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::vector<int> a(37);
    std::iota(a.begin(), a.end(), 0);
    auto b = a;
    DeterministicRng r1(seed), r2(seed);
    orchkit::bench::shuffle(r1, a);
    orchkit::bench::shuffle(r2, b);
    CHECK(a == b);
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 37; ++i) REQUIRE(sorted[i] == i);
  }
}

TEST_CASE("shuffle positions are roughly uniform") {
  // element 0 lands in each of 4 slots with probability 1/4
  std::vector<int> hits(4, 0);
  const int n = 40000;
  DeterministicRng rng(3);
  for (int t = 0; t < n; ++t) {
    std::vector<int> v = {0, 1, 2, 3};
    orchkit::bench::shuffle(rng, v);
    hits[std::find(v.begin(), v.end(), 0) - v.begin()]++;
  }
  for (int h : hits) CHECK(std::abs(h - n / 4) < 4 * 87);  // 4 sigma
}

TEST_CASE("next_unit range") {
  DeterministicRng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("fnv1a64 and derive_seed") {
  CHECK(orchkit::bench::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(orchkit::bench::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(orchkit::bench::derive_seed(42, "x") == orchkit::bench::derive_seed(42, "x"));
  CHECK(orchkit::bench::derive_seed(42, "x") != orchkit::bench::derive_seed(42, "y"));
  CHECK(orchkit::bench::derive_seed(42, "x") != orchkit::bench::derive_seed(43, "x"));
}

TEST_CASE("sha256 known answers") {
  CHECK(orchkit::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(orchkit::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
