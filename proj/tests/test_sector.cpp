#include "doctest.h"
#include "fixtures.hpp"

using namespace dcmg;
using dcmg::testing::default_network;

TEST_CASE("sector bounds follow the voltage box") {
  const NetworkSpec& s = default_network();
  SectorBound b = sector_bounds(s.dgs[0], s.loads[0], 48.0, s.V_min, s.V_max);
  CHECK(b.alpha == doctest::Approx(50.0 / (51.0 * 51.0)));
  CHECK(b.beta == doctest::Approx(50.0 / (45.0 * 45.0)));
  CHECK(b.center() == doctest::Approx(0.5 * (b.alpha + b.beta)));
  CHECK(b.alpha < b.beta);
  CHECK_THROWS_AS(sector_bounds(s.dgs[0], s.loads[0], 52.0, s.V_min, s.V_max), std::invalid_argument);
  CHECK_THROWS_AS(sector_bounds(s.dgs[0], s.loads[0], 48.0, 0.0, s.V_max), std::invalid_argument);
}

TEST_CASE("nonlinearity vanishes at the reference and matches the CPL current") {
  const NetworkSpec& s = default_network();
  const auto& dg = s.dgs[2];
  const auto& z = s.loads[2];
  CHECK(cpl_nonlinearity(dg, z, 48.0, 0.0) == 0.0);
  // (P/C)(1/V_r - 1/V) is the deviation of -P/(C V) from its value at V_r.
  const double V = 46.3;
  CHECK(cpl_nonlinearity(dg, z, 48.0, V - 48.0) ==
        doctest::Approx(-(z.P_L / (dg.C_t * V)) + z.P_L / (dg.C_t * 48.0)));
  CHECK_THROWS_AS(cpl_nonlinearity(dg, z, 48.0, -48.0), std::domain_error);
  CHECK_THROWS_AS(cpl_nonlinearity(dg, z, 48.0, -60.0), std::domain_error);
}

TEST_CASE("sampled chord slopes stay inside the sector") {
  const NetworkSpec& s = default_network();
  std::mt19937 rng(4);
  for (int i = 0; i < s.num_dgs(); ++i) {
    for (double V_r : {s.V_min, 48.0, s.V_max}) {
      SectorBound b = sector_bounds(s.dgs[i], s.loads[i], V_r, s.V_min, s.V_max);
      std::uniform_real_distribution<double> u(s.V_min - V_r, s.V_max - V_r);
      int violations = 0;
      for (int k = 0; k < 10000; ++k) {
        const double Vt = u(rng);
        if (Vt == 0.0) continue;
        const double g = cpl_nonlinearity(s.dgs[i], s.loads[i], V_r, Vt);
        const double slope = g / Vt;
        // Relative slack covers the cancellation in 1/V_r - 1/V when V_r sits on a box edge.
        if (slope < b.alpha * (1 - 1e-9) || slope > b.beta * (1 + 1e-9)) ++violations;
        if (sector_form(b, Vt, g) < -1e-12) ++violations;
      }
      CHECK(violations == 0);
    }
  }
}

TEST_CASE("the sector fails outside the voltage box") {
  const NetworkSpec& s = default_network();
  SectorBound b = sector_bounds(s.dgs[0], s.loads[0], 48.0, s.V_min, s.V_max);
  const double Vt = 20.0 - 48.0;
  const double g = cpl_nonlinearity(s.dgs[0], s.loads[0], 48.0, Vt);
  CHECK(g / Vt > b.beta);
  CHECK(sector_form(b, Vt, g) < 0.0);
}

TEST_CASE("the lifted quadratic reproduces the scalar sector form") {
  const NetworkSpec& s = default_network();
  SectorBound b = sector_bounds(s.dgs[1], s.loads[1], 48.0, s.V_min, s.V_max);
  SectorQuadratic q = sector_quadratic(b);
  CHECK(q.Theta.isApprox(q.Theta.transpose()));
  CHECK(q.block(0, 1).isApprox(q.block(1, 0)));
  std::mt19937 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    Eigen::VectorXd z(6);
    Eigen::Vector3d x(n(rng), n(rng), n(rng));
    const double g = n(rng);
    z << x, q.T * g;
    CHECK(z.dot(q.Theta * z) == doctest::Approx(sector_form(b, x(0), g)).epsilon(1e-12));
  }
}
