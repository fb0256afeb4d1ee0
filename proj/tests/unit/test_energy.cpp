#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ogl/csv.hpp"
#include "ogl/energy.hpp"
#include "ogl/rng.hpp"

using ogl::energy::CostParams;
using ogl::energy::EnergyEvent;
using ogl::energy::EnergyLedger;

namespace {

/// Recomputes S, Gamma, C from the raw event log through the closed forms.
struct Replay {
  double s = 0.0, gamma = 0.0, c = 0.0;

  explicit Replay(const std::vector<EnergyEvent>& events, const CostParams& p) {
    for (const auto& e : events) {
      switch (e.kind) {
        case EnergyEvent::Kind::train:
          s += static_cast<double>(e.z) * static_cast<double>(e.d) * (p.e_g + p.e_s);
          break;
        case EnergyEvent::Kind::eval:
          gamma += static_cast<double>(e.s) * (p.e_e + p.e_es);
          break;
        case EnergyEvent::Kind::comm:
          c += p.c_d2d * (static_cast<double>(e.h) * static_cast<double>(p.L) +
                          static_cast<double>(e.k) * static_cast<double>(p.M + p.R));
          break;
        case EnergyEvent::Kind::infra:
          break;
      }
    }
  }
};

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace

TEST_CASE("energy: closed-form deltas") {
  CostParams p;
  EnergyLedger ledger;

  ledger.record_training(0, 0, 2, 100, p);
  CHECK(ledger.training_total() == doctest::Approx(0.3));

  ledger.record_training(1, 0, 0, 100, p);
  CHECK(ledger.training_total() == doctest::Approx(0.3));

  ledger.record_evaluation(0, 0, 40, p);
  CHECK(ledger.evaluation_total() == doctest::Approx(0.012));
  ledger.record_evaluation(1, 0, 0, p);
  CHECK(ledger.evaluation_total() == doctest::Approx(0.012));

  ledger.record_communication(0, 0, 3, 1, p);
  CHECK(ledger.communication_total() == doctest::Approx(3.20256e-4).epsilon(1e-12));
  ledger.record_communication(1, 0, 0, 0, p);
  CHECK(ledger.communication_total() == doctest::Approx(3.20256e-4).epsilon(1e-12));
}

TEST_CASE("energy: duplicate and malformed records are rejected") {
  CostParams p;
  EnergyLedger ledger;
  ledger.record_training(0, 0, 1, 10, p);
  CHECK_THROWS_AS(ledger.record_training(0, 0, 2, 10, p), std::invalid_argument);
  ledger.record_training(0, 1, 1, 10, p);  // next slot is fine

  ledger.record_evaluation(0, 0, 5, p);
  CHECK_THROWS_AS(ledger.record_evaluation(0, 0, 5, p), std::invalid_argument);

  CHECK_THROWS_AS(ledger.record_communication(0, 0, 2, 3, p), std::invalid_argument);
  CHECK_THROWS_AS(ledger.record_communication(0, 0, -1, 0, p), std::invalid_argument);
  CHECK_THROWS_AS(ledger.record_training(1, 0, -1, 10, p), std::invalid_argument);
}

TEST_CASE("energy: objective composes totals linearly in beta") {
  CostParams p;
  EnergyLedger ledger;
  CHECK(ledger.objective(p) == 0.0);

  ledger.record_training(0, 0, 4, 500, p);   // S = 3.0
  ledger.record_evaluation(0, 0, 5000, p);   // Gamma = 1.5
  ledger.record_communication(0, 0, 2, 0, p);

  double s = ledger.training_total();
  double gamma = ledger.evaluation_total();
  double c = ledger.communication_total();
  CHECK(s == doctest::Approx(3.0));
  CHECK(gamma == doctest::Approx(1.5));

  for (double beta : {0.0, 0.5, 1.0, 2.0}) {
    CostParams q = p;
    q.beta = beta;
    CHECK(ledger.objective(q) == c + beta * (s + gamma));
  }
}

TEST_CASE("energy: totals equal event-log replay across seeded runs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ogl::Rng rng(seed);
    CostParams p;
    p.e_g = rng.uniform(1e-4, 1e-2);
    p.e_s = rng.uniform(1e-4, 1e-2);
    p.e_e = rng.uniform(1e-5, 1e-3);
    p.e_es = rng.uniform(1e-5, 1e-3);
    p.c_d2d = rng.uniform(1e-10, 1e-8);

    EnergyLedger ledger;
    int nodes = 2 + static_cast<int>(rng.uniform_int(6));
    int slots = 20 + static_cast<int>(rng.uniform_int(30));
    for (int t = 0; t < slots; ++t) {
      for (int v = 0; v < nodes; ++v) {
        int z = static_cast<int>(rng.uniform_int(6));
        auto d = static_cast<long long>(rng.uniform_int_range(10, 300));
        ledger.record_training(v, t, z, d, p);
        ledger.record_evaluation(v, t, rng.uniform_int_range(5, 80), p);
        int h = static_cast<int>(rng.uniform_int(5));
        int k = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(h) + 1));
        ledger.record_communication(v, t, h, k, p);
      }
    }

    Replay replay(ledger.events(), p);
    CHECK(close_rel(ledger.training_total(), replay.s, 1e-12));
    CHECK(close_rel(ledger.evaluation_total(), replay.gamma, 1e-12));
    CHECK(close_rel(ledger.communication_total(), replay.c, 1e-12));

    for (double beta : {0.0, 0.5, 1.0}) {
      CostParams q = p;
      q.beta = beta;
      CHECK(ledger.objective(q) ==
            ledger.communication_total() +
                beta * (ledger.training_total() + ledger.evaluation_total()));
    }
  }
}

TEST_CASE("energy: communication cost is monotone in h and k") {
  CostParams p;
  EnergyLedger base, more_h, more_k;
  base.record_communication(0, 0, 2, 1, p);
  more_h.record_communication(0, 0, 3, 1, p);
  more_k.record_communication(0, 0, 2, 2, p);
  CHECK(more_h.communication_total() > base.communication_total());
  CHECK(more_k.communication_total() > base.communication_total());
}

TEST_CASE("energy: per-node cost splits the objective") {
  CostParams p;
  EnergyLedger ledger;
  ledger.record_training(0, 0, 2, 100, p);
  ledger.record_training(1, 0, 1, 50, p);
  ledger.record_evaluation(0, 0, 10, p);
  ledger.record_communication(1, 0, 4, 2, p);

  CHECK(ledger.node_cost(0, p) + ledger.node_cost(1, p) == doctest::Approx(ledger.objective(p)));
  CHECK(ledger.node_cost(2, p) == 0.0);

  CostParams q = p;
  q.beta = 0.0;
  CHECK(ledger.node_cost(0, q) == 0.0);  // node 0 has no communication
}

TEST_CASE("energy: infra counter stays out of the objective and the csv") {
  CostParams p;
  EnergyLedger ledger;
  ledger.record_infra(3, 0, 12000, p);
  CHECK(ledger.infra_total() == doctest::Approx(12000 * p.c_infra));
  CHECK(ledger.objective(p) == 0.0);
  CHECK(ledger.node_cost(3, p) == 0.0);

  ledger.record_training(3, 0, 1, 10, p);
  std::ostringstream out;
  ledger.export_csv(out);
  CHECK(out.str().find("infra") == std::string::npos);
}

TEST_CASE("energy: exported csv replays to the same totals") {
  CostParams p;
  EnergyLedger ledger;
  ogl::Rng rng(99);
  for (int t = 0; t < 25; ++t) {
    for (int v = 0; v < 4; ++v) {
      ledger.record_training(v, t, static_cast<int>(rng.uniform_int(4)),
                             rng.uniform_int_range(20, 200), p);
      ledger.record_evaluation(v, t, rng.uniform_int_range(5, 50), p);
      int h = static_cast<int>(rng.uniform_int(4));
      ledger.record_communication(v, t, h, static_cast<int>(rng.uniform_int(
                                               static_cast<std::uint64_t>(h) + 1)), p);
    }
  }
  std::ostringstream out;
  ledger.export_csv(out);
  std::istringstream in(out.str());
  ogl::csv::Table t = ogl::csv::read_table(in);
  REQUIRE(t.rows.size() == ledger.events().size());

  double s = 0, gamma = 0, c = 0;
  int c_event = t.column("event");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string& kind = row[static_cast<std::size_t>(c_event)];
    auto z = ogl::csv::parse_int(row[3], i, 3);
    auto d = ogl::csv::parse_int(row[4], i, 4);
    auto sv = ogl::csv::parse_int(row[5], i, 5);
    auto h = ogl::csv::parse_int(row[6], i, 6);
    auto k = ogl::csv::parse_int(row[7], i, 7);
    if (kind == "train") {
      s += static_cast<double>(z) * static_cast<double>(d) * (p.e_g + p.e_s);
    } else if (kind == "eval") {
      gamma += static_cast<double>(sv) * (p.e_e + p.e_es);
    } else if (kind == "comm") {
      c += p.c_d2d * (static_cast<double>(h) * static_cast<double>(p.L) +
                      static_cast<double>(k) * static_cast<double>(p.M + p.R));
    } else {
      FAIL("unexpected event kind ", kind);
    }
  }
  CHECK(close_rel(s, ledger.training_total(), 1e-12));
  CHECK(close_rel(gamma, ledger.evaluation_total(), 1e-12));
  CHECK(close_rel(c, ledger.communication_total(), 1e-12));
}
