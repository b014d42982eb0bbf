#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "iadcps/csv.hpp"
#include "iadcps/log.hpp"
#include "iadcps/rng.hpp"

using iadcps::Rng;

TEST_CASE("rng uniform is the top 53 bits of mt19937_64") {
  // the standard pins the 10000th output of a default-seeded mt19937_64
  Rng rng(5489);
  double u = 0.0;
  for (int i = 0; i < 10000; ++i) u = rng.uniform();
  CHECK(u == 0.5411006783847329);
}

TEST_CASE("rng streams are reproducible and bounded") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  for (int i = 0; i < 1000; ++i) CHECK(a.below(7) < 7);
  CHECK(Rng::derive(1, 2) != Rng::derive(1, 3));
  CHECK(Rng::derive(1, 2) == Rng::derive(1, 2));
}

TEST_CASE("rng gaussian moments") {
  Rng rng(3);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("csv number formatting round-trips") {
  for (double v : {0.1, -2.5, 1e-300, 123456789.125, 0.30000000000000004}) {
    double back = 0.0;
    REQUIRE(iadcps::csv::parse(iadcps::csv::format(v), back));
    CHECK(back == v);
  }
  CHECK(iadcps::csv::format(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(iadcps::csv::format(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("csv strict parsing") {
  double d = 0.0;
  long long n = 0;
  CHECK(iadcps::csv::parse(" 2.5\r", d));
  CHECK(d == 2.5);
  CHECK_FALSE(iadcps::csv::parse("2.5x", d));
  CHECK_FALSE(iadcps::csv::parse("", d));
  CHECK(iadcps::csv::parse("17", n));
  CHECK(n == 17);
  CHECK_FALSE(iadcps::csv::parse("1.5", n));
  const auto fields = iadcps::csv::split("a,,b");
  REQUIRE(fields.size() == 3);
  CHECK(fields[1].empty());
}

TEST_CASE("warnings reach an installed sink") {
  std::vector<std::string> seen;
  auto previous = iadcps::log::set_warning_sink([&](const std::string& m) { seen.push_back(m); });
  iadcps::log::warn("hello");
  iadcps::log::set_warning_sink(previous);
  REQUIRE(seen.size() == 1);
  CHECK(seen[0] == "hello");
}
