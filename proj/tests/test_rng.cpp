#include <set>

#include "doctest.h"
#include "pdmp/rng.hpp"

using namespace pdmp;

TEST_CASE("philox matches numpy reference output for a zero key") {
  Philox4x64 gen({0, 0}, {0, 0, 0, 0});
  const std::uint64_t expected[] = {0x02f4ba6408e4d89bULL, 0x3dd62b0b9ca8c5b2ULL, 0x1c8667a55d902e79ULL,
                                    0x907d7a052fd5b4dcULL, 0x809bf322883987c3ULL, 0x471128b9e807f7ddULL,
                                    0xf250ba0dbec065b7ULL, 0xfc6ed66767a457bcULL};
  for (auto e : expected) CHECK(gen() == e);
}

TEST_CASE("philox matches numpy reference output for a keyed sub-stream") {
  Philox4x64 gen({12345, 7}, {0, 0, 3, 0});
  const std::uint64_t expected[] = {0x8ea475decbd1885dULL, 0x0880459f1bb30abcULL, 0x17b2ad074a84b38fULL,
                                    0x7ee9d0d1f7bdf073ULL, 0x467884001a6e7d6bULL, 0xd7659b74fdfac33eULL,
                                    0x236545af3315b8b7ULL, 0x1323ddf049c44a5fULL};
  for (auto e : expected) CHECK(gen() == e);
  CHECK(gen.counter() == Philox4x64::counter_type{2, 0, 3, 0});
}

TEST_CASE("sub-streams and replication streams are distinct and reproducible") {
  Rng a({42, 0}, SubStream::exponential_marks);
  Rng b({42, 0}, SubStream::jump_sizes);
  Rng c({42, 1}, SubStream::exponential_marks);
  Rng a2({42, 0}, SubStream::exponential_marks);
  std::set<std::uint64_t> first{a(), b(), c()};
  CHECK(first.size() == 3);
  Rng a3({42, 0}, SubStream::exponential_marks);
  a3();
  CHECK(a2() == Rng({42, 0}, SubStream::exponential_marks)());
}

TEST_CASE("uniform draws stay inside their intervals and exponential has unit mean") {
  Rng r({7, 3}, SubStream::auxiliary);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    const double v = r.uniform_open();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
    sum += r.exponential();
  }
  CHECK(std::abs(sum / n - 1.0) < 4.0 / std::sqrt(n));
}
