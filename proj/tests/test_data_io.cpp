#include <cmath>
#include <sstream>

#include "doctest.h"
#include "egpssm/data_io.hpp"
#include "egpssm/errors.hpp"

using namespace egpssm;

TEST_CASE("kink function examples") {
  CHECK(kink_function(0.0, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  KinkOptions nf;
  nf.noise_free = true;
  const auto tr = simulate_kink(Vector::Zero(2), 1, 1, nf);
  CHECK(tr.states(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(tr.states(1, 1) == doctest::Approx(-0.25).epsilon(1e-15));
  CHECK_THROWS_AS(gen_kink(0, 5, 1), InvalidConfig);
  CHECK_THROWS_AS(gen_kink(2, 0, 1), InvalidConfig);
}

TEST_CASE("noise-free rollouts follow the map exactly") {
  KinkOptions nf;
  nf.noise_free = true;
  Vector x0(2);
  x0 << 0.3, -0.1;
  const auto tr = simulate_kink(x0, 12, 9, nf);
  for (Index t = 0; t + 1 < tr.states.rows(); ++t) {
    const double f = kink_function(tr.states(t, 0), tr.states(t, 1));
    CHECK(tr.states(t + 1, 0) == tr.states(t, 0) + f);
    CHECK(tr.states(t + 1, 1) == tr.states(t, 1) - 0.5 * f);
  }
  CHECK(tr.observations == tr.states.bottomRows(12));
}

TEST_CASE("gen_kink is deterministic per seed") {
  const auto a = gen_kink(3, 20, 42);
  const auto b = gen_kink(3, 20, 42);
  const auto c = gen_kink(3, 20, 43);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].y == b[i].y);
    CHECK(a[i].length() == 20);
    CHECK(a[i].d_y() == 2);
    CHECK(a[i].d_c() == 0);
  }
  CHECK(a[0].y != c[0].y);
}

TEST_CASE("load_csv examples") {
  {
    std::istringstream in("u1,y1\n0.5,1.0\n-0.5,2.0\n");
    const auto s = parse_csv(in, "x");
    CHECK(s.length() == 2);
    CHECK(s.d_c() == 1);
    CHECK(s.d_y() == 1);
    CHECK(s.c(1, 0) == -0.5);
    CHECK(s.y(1, 0) == 2.0);
  }
  {
    std::istringstream in("y1\n1\n2\n3\n");
    const auto s = parse_csv(in, "x");
    CHECK(s.d_c() == 0);
    CHECK(s.length() == 3);
  }
  {
    std::istringstream in("y1,y2\n1,2\n3,4\n5,6\n7,8\n9,10\nabc,1\n");
    try {
      parse_csv(in, "x");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 7);
    }
  }
  {
    std::istringstream in("u1,u2\n1,2\n");
    CHECK_THROWS_AS(parse_csv(in, "x"), MissingColumn);
  }
  {
    std::istringstream in("y1,y2\n1\n");
    CHECK_THROWS_AS(parse_csv(in, "x"), ParseError);
  }
}

TEST_CASE("CSV write then read round-trips bit-exactly") {
  auto seqs = gen_kink(1, 15, 7);
  Sequence s = seqs[0];
  s.c = s.y.col(0) * 0.1;
  s.c(3, 0) = 1e-300;
  s.y(4, 1) = -1.0 / 3.0;
  std::ostringstream out;
  write_csv(s, out);
  std::istringstream in(out.str());
  const auto r = parse_csv(in, s.name);
  CHECK(r.y == s.y);
  CHECK(r.c == s.c);
  CHECK(r.provenance == s.provenance);
  std::ostringstream again;
  write_csv(r, again);
  CHECK(again.str() == out.str());
}

TEST_CASE("split_standardize examples") {
  Sequence s;
  s.y.resize(100, 2);
  s.c.resize(100, 1);
  for (Index t = 0; t < 100; ++t) {
    s.y(t, 0) = std::sin(0.3 * t) * 4 + 2;
    s.y(t, 1) = 0.01 * t * t;
    s.c(t, 0) = std::cos(0.7 * t);
  }
  const auto r = split_standardize(s, 0.5);
  CHECK(r.train.length() == 50);
  CHECK(r.test.length() == 50);
  for (Index k = 0; k < 2; ++k) {
    const Vector col = r.train.y.col(k);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().mean());
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(sd - 1.0) < 1e-10);
  }
  const Sequence back = r.standardizer.invert(r.train);
  CHECK((back.y - s.y.topRows(50)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.c - s.c.topRows(50)).cwiseAbs().maxCoeff() < 1e-12);
  const Sequence back_test = r.standardizer.invert(r.test);
  CHECK((back_test.y - s.y.bottomRows(50)).cwiseAbs().maxCoeff() < 1e-12);

  Sequence flat = s;
  flat.y.col(1).head(60).setConstant(3.0);
  CHECK_THROWS_AS(split_standardize(flat, 0.5), DegenerateChannel);
  CHECK_THROWS_AS(split_standardize(s.slice(0, 3), 0.5), SequenceTooShort);
  CHECK_THROWS_AS(split_standardize(s, 1.0), InvalidConfig);
}
