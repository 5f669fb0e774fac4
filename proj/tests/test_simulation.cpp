#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "vmiv/io.hpp"
#include "vmiv/simulation.hpp"

using namespace vmiv;

TEST_CASE("three-instrument design oracle") {
  // Compliers are the 18 groups labelled 3..20, each with mean effect label + 1/2.
  double sum = 0;
  for (int g = 3; g <= 20; ++g) sum += g + 0.5;
  const double acl = sum / 18.0;
  for (int variant : {1, 2}) {
    const auto o = oracle_estimand(three_instrument_spec(variant), Estimand::acl());
    CHECK(o.value == Catch::Approx(acl).epsilon(1e-14));
    CHECK(o.complier_share == Catch::Approx(0.9).epsilon(1e-14));
  }
  CHECK(acl == 12.0);
}

TEST_CASE("two-instrument design oracle") {
  const auto spec = two_instrument_spec();
  const auto o = oracle_estimand(spec, Estimand::acl());
  CHECK(o.value == Catch::Approx(0.9 * 2.0 + 0.1 * -8.0).epsilon(1e-14));
  CHECK(o.complier_share == Catch::Approx(1.0).epsilon(1e-14));
  const auto s1 = oracle_estimand(spec, Estimand::from(TargetParameter::slate(InstrumentSet::of(1))));
  CHECK(s1.value == Catch::Approx(2.0).epsilon(1e-14));
  const auto s2 = oracle_estimand(spec, Estimand::from(TargetParameter::slate(InstrumentSet::of(2))));
  CHECK(s2.value == Catch::Approx(-8.0).epsilon(1e-14));
}

TEST_CASE("cell probabilities") {
  const auto p1 = cell_probabilities(three_instrument_spec(1));
  for (double p : p1) CHECK(p == Catch::Approx(0.125));
  const auto p2 = cell_probabilities(three_instrument_spec(2));
  double total = 0, z2 = 0, z2z3 = 0;
  for (std::size_t b = 0; b < p2.size(); ++b) {
    total += p2[b];
    if (b & 2) z2 += p2[b];
    if ((b & 2) && (b & 4)) z2z3 += p2[b];
  }
  CHECK(total == Catch::Approx(1.0));
  CHECK(z2z3 / z2 == Catch::Approx(0.05));

  const auto pt = cell_probabilities(two_instrument_spec());
  const double both = 0.25 + std::asin(-0.8) / (2 * std::numbers::pi);
  CHECK(pt[3] == Catch::Approx(both).epsilon(1e-14));
  CHECK(pt[0] == Catch::Approx(both).epsilon(1e-14));
  CHECK(pt[1] == Catch::Approx(0.5 - both).epsilon(1e-14));
}

TEST_CASE("simulated group labels and instruments follow the design") {
  const Eigen::Index n = 200000;
  const auto sim = dgp_three_instruments(1, n, 5);
  std::vector<double> freq(20, 0.0);
  for (auto g : sim.groups) freq[g] += 1.0 / double(n);
  const double sd = std::sqrt(0.05 * 0.95 / double(n));
  for (double f : freq) CHECK(std::abs(f - 0.05) < 4.5 * sd);

  const auto v2 = dgp_three_instruments(2, n, 6);
  double on2 = 0, on23 = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (v2.data.z(i, 1) == 1) {
      on2 += 1;
      on23 += v2.data.z(i, 2);
    }
  CHECK(std::abs(on23 / on2 - 0.05) < 0.004);

  const auto two = dgp_two_instruments(n, 7);
  const Eigen::ArrayXd a = two.data.z.col(0).array() - two.data.z.col(0).mean();
  const Eigen::ArrayXd b = two.data.z.col(1).array() - two.data.z.col(1).mean();
  const double corr = (a * b).sum() / std::sqrt(a.square().sum() * b.square().sum());
  CHECK(corr == Catch::Approx(2.0 / std::numbers::pi * std::asin(-0.8)).margin(0.01));
}

TEST_CASE("treatment follows the group's selection function") {
  const auto sim = dgp_three_instruments(1, 5000, 8);
  const GroupCatalog cat(3);
  const auto rows = row_assignments(sim.data.z);
  for (std::size_t i = 0; i < rows.size(); ++i)
    CHECK(sim.data.d(Eigen::Index(i)) == selection_value(cat[sim.groups[i]], rows[i]));
}

TEST_CASE("simulation is reproducible") {
  const auto a = dgp_two_instruments(100, 3);
  const auto b = dgp_two_instruments(100, 3);
  const auto c = dgp_two_instruments(100, 4);
  CHECK(a.data.y == b.data.y);
  CHECK(a.data.y != c.data.y);
}

TEST_CASE("Monte Carlo results do not depend on the number of workers") {
  const auto spec = three_instrument_spec(1);
  const std::vector<McEstimator> ests{vm_estimator(), wald_estimator(), tsls_estimator()};
  const auto serial = run_monte_carlo(spec, 300, 12, ests, 9, 1);
  const auto threaded = run_monte_carlo(spec, 300, 12, ests, 9, 3);
  for (const auto& name : {"vm", "wald", "tsls"}) {
    CHECK(serial.at(name).estimates == threaded.at(name).estimates);
    CHECK(serial.at(name).mean == threaded.at(name).mean);
  }
  CHECK(serial.at("vm").oracle == Catch::Approx(12.0).epsilon(1e-14));
  CHECK_THROWS_AS(serial.at("nope"), InvalidArgument);
}

TEST_CASE("saturated 2SLS equals Wald with one instrument") {
  DgpSpec spec;
  spec.name = "one";
  spec.j = 1;
  spec.group_probabilities = {0.2, 0.3, 0.5};
  spec.outcomes = {GroupOutcome{0, 1, 1, 0}, GroupOutcome{0, 1, 2, 0}, GroupOutcome{0, 1, 3, 1}};
  spec.law = BernoulliLaw{{0.5}};
  const auto sim = simulate(spec, 2000, 1);
  CHECK(saturated_2sls(sim.data.y, sim.data.d, sim.data.z) ==
        Catch::Approx(wald_acl(sim.data.y, sim.data.d, sim.data.z).point).epsilon(1e-9));
}

TEST_CASE("DGP descriptions read from JSON") {
  const auto j = Json::parse(R"({
    "name": "toy", "j": 2,
    "groups": [
      {"family": "never", "probability": 0.2},
      {"family": [[1]], "probability": 0.5, "effect": 1.0},
      {"family": [[1], [2]], "probability": 0.3, "effect": 3.0, "effect_noise": 2.0}
    ],
    "instruments": {"law": "bernoulli", "p": [0.5, 0.4]}
  })");
  const auto spec = dgp_from_json(j);
  const auto o = oracle_estimand(spec, Estimand::acl());
  CHECK(o.complier_share == Catch::Approx(0.8));
  CHECK(o.value == Catch::Approx((0.5 * 1.0 + 0.3 * 4.0) / 0.8));

  auto bad = j;
  bad["groups"][0]["probability"] = 0.5;
  CHECK_THROWS_AS(dgp_from_json(bad), InvalidArgument);
  auto unknown = j;
  unknown["instruments"]["law"] = "poisson";
  CHECK_THROWS_AS(dgp_from_json(unknown), InvalidArgument);
  CHECK_THROWS_AS(dgp_from_json(Json::object()), InputError);
}
