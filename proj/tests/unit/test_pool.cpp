#include "doctest.h"

#include "common.hpp"
#include "mfscale/csv.hpp"
#include "mfscale/errors.hpp"
#include "mfscale/pool.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace mfscale;

TEST_CASE("pool: sampled cases cover the parameter box") {
  auto cases = sample_cases(500, 3);
  REQUIRE(cases.size() == 500);
  double lo = 1e9, hi = 0, below_1e5 = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    CHECK(cases[i].case_id == static_cast<int>(i));
    CHECK_NOTHROW(validate(cases[i]));
    lo = std::min(lo, cases[i].re_delta);
    hi = std::max(hi, cases[i].re_delta);
    below_1e5 += cases[i].re_delta < 1e5;
  }
  // log-uniform: half the draws below the geometric midpoint
  CHECK(below_1e5 / 500.0 == doctest::Approx(0.5).epsilon(0.15));
  CHECK(lo < 1.2e4);
  CHECK(hi > 8e5);
}

TEST_CASE("pool: minimal pool of two pairs") {
  auto p = generate_pool(2, 9);
  CHECK(p.size() == 2);
  CHECK(p.low_solutions.size() == 2);
  CHECK(p.high_solutions.size() == 2);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(p.low_solutions[i].flow_case.case_id == p.cases[i].case_id);
    CHECK(p.high_solutions[i].flow_case.case_id == p.cases[i].case_id);
    CHECK(p.low_solutions[i].fidelity == Fidelity::Low);
    CHECK(p.high_solutions[i].fidelity == Fidelity::High);
  }
  CHECK_THROWS_AS(generate_pool(1, 9), PoolError);
}

TEST_CASE("pool: same seed gives byte-identical manifests") {
  testutil::TempDir a("poolA"), b("poolB");
  save_pool(generate_pool(12, 42), a.path);
  save_pool(generate_pool(12, 42), b.path);
  CHECK(read_file(a.path / "manifest.csv") == read_file(b.path / "manifest.csv"));
  CHECK(read_file(a.path / "fields" / "3_high.csv") == read_file(b.path / "fields" / "3_high.csv"));
  testutil::TempDir c("poolC");
  save_pool(generate_pool(12, 43), c.path);
  CHECK(read_file(a.path / "manifest.csv") != read_file(c.path / "manifest.csv"));
}

TEST_CASE("pool: cost ratio on a 128-pair pool") {
  auto p = generate_pool(128, 0);
  CHECK(p.size() + p.dropped_case_ids.size() == 128);
  const double r = p.cost_model.ratio();
  CHECK(r >= 2.5);
  CHECK(r <= 3.5);
  // recompute from the solutions
  double lo = 0, hi = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    lo += p.low_solutions[i].work_units;
    hi += p.high_solutions[i].work_units;
    CHECK(p.high_solutions[i].mesh.first_center_yplus < 1.0);
    CHECK(p.low_solutions[i].mesh.first_center_yplus >= 30.0);
    CHECK(p.low_solutions[i].mesh.first_center_yplus <= 300.0);
  }
  CHECK(r == doctest::Approx(hi / lo).epsilon(1e-12));
}

TEST_CASE("pool: save/load round trip is exact") {
  const auto& p = testutil::small_pool();
  testutil::TempDir d("roundtrip");
  save_pool(p, d.path);
  auto q = load_pool(d.path);
  REQUIRE(q.size() == p.size());
  CHECK(q.dropped_case_ids == p.dropped_case_ids);
  CHECK(q.cost_model.avg_cost_low == p.cost_model.avg_cost_low);
  CHECK(q.cost_model.avg_cost_high == p.cost_model.avg_cost_high);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(q.cases[i].case_id == p.cases[i].case_id);
    CHECK(q.cases[i].re_delta == p.cases[i].re_delta);
    CHECK(q.cases[i].beta_p == p.cases[i].beta_p);
    for (auto f : {Fidelity::Low, Fidelity::High}) {
      const auto& a = p.solution(p.cases[i].case_id, f);
      const auto& b = q.solution(p.cases[i].case_id, f);
      CHECK(a.u == b.u);
      CHECK(a.mesh.node_y == b.mesh.node_y);
      CHECK(a.tau_w == b.tau_w);
      CHECK(a.work_units == b.work_units);
      CHECK(a.iterations == b.iterations);
      CHECK(a.mesh.first_center_yplus == b.mesh.first_center_yplus);
    }
  }
  // saving the loaded pool reproduces the same bytes
  testutil::TempDir e("roundtrip2");
  save_pool(q, e.path);
  CHECK(read_file(d.path / "manifest.csv") == read_file(e.path / "manifest.csv"));
}

TEST_CASE("pool: manifest header and missing files") {
  const auto& p = testutil::small_pool();
  testutil::TempDir d("manifest");
  save_pool(p, d.path);
  auto t = read_csv(d.path / "manifest.csv");
  CHECK(join_csv(t.header) ==
        "case_id,re_delta,beta_p,low_path,high_path,low_work_units,high_work_units,low_converged,"
        "high_converged,low_iterations,high_iterations,low_first_yplus,high_first_yplus");
  std::filesystem::remove(d.path / "fields" / (std::to_string(p.cases[0].case_id) + "_low.csv"));
  CHECK_THROWS(load_pool(d.path));
}

TEST_CASE("pool: split is disjoint, complete and seeded") {
  const auto& p = testutil::small_pool();
  auto [comp, test] = split_pool(p, 8, 77);
  CHECK(test.size() == 8);
  CHECK(comp.size() == p.size() - 8);
  std::set<int> ids;
  for (const auto& c : comp.cases) ids.insert(c.case_id);
  for (const auto& c : test.cases) CHECK(ids.insert(c.case_id).second);
  CHECK(ids.size() == p.size());
  auto [comp2, test2] = split_pool(p, 8, 77);
  for (std::size_t i = 0; i < test.size(); ++i) CHECK(test.cases[i].case_id == test2.cases[i].case_id);
  CHECK(std::is_sorted(comp.cases.begin(), comp.cases.end(),
                       [](const FlowCase& a, const FlowCase& b) { return a.case_id < b.case_id; }));
  CHECK_THROWS_AS(split_pool(p, p.size(), 1), ConfigError);
}

TEST_CASE("pool: solution lookup") {
  const auto& p = testutil::small_pool();
  const int id = p.cases[3].case_id;
  CHECK(p.index_of(id) == 3);
  CHECK(p.index_of(-5) == -1);
  CHECK(&p.solution(id, Fidelity::High) == &p.high_solutions[3]);
  CHECK_THROWS_AS(p.solution(-5, Fidelity::Low), ContractError);
}

TEST_CASE("pool: default-size pool keeps the cost ratio") {
  auto p = generate_pool(611, 0);
  CHECK(p.size() <= 611);
  CHECK(p.size() >= 600);
  CHECK(p.cost_model.ratio() >= 2.5);
  CHECK(p.cost_model.ratio() <= 3.5);
}
