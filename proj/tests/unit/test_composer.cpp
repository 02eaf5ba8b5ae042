#include "doctest.h"

#include "common.hpp"
#include "../support/compose_oracle.hpp"
#include "mfscale/composer.hpp"
#include "mfscale/errors.hpp"
#include "mfscale/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace mfscale;
using namespace testutil;

namespace {

std::vector<PoolSample> hand_pool() {
  return {{0, Fidelity::Low, 1.0},  {1, Fidelity::Low, 0.9}, {2, Fidelity::Low, 1.1},
          {0, Fidelity::High, 3.0}, {1, Fidelity::High, 3.2}};
}

void check_well_formed(const Selection& s, std::span<const PoolSample> pool, const DatasetBudgetSpec& spec) {
  CHECK(std::is_sorted(s.low_ids.begin(), s.low_ids.end()));
  CHECK(std::is_sorted(s.high_ids.begin(), s.high_ids.end()));
  CHECK(std::adjacent_find(s.low_ids.begin(), s.low_ids.end()) == s.low_ids.end());
  CHECK(std::adjacent_find(s.high_ids.begin(), s.high_ids.end()) == s.high_ids.end());
  CHECK(s.total_cost == doctest::Approx(cost_of(s, pool)).epsilon(1e-12));
  CHECK(s.total_cost <= spec.budget_db);
  CHECK(maximal(s, pool, spec));
}

}  // namespace

TEST_CASE("estimate_counts: worked examples") {
  CostModel c{4.8, 13.4};
  auto a = estimate_counts({134, 0.5, CompositionMode::BudgetShare}, c);
  CHECK(a.n_high == 5);
  CHECK(a.n_low == 13);
  auto b = estimate_counts({134, 0.0, CompositionMode::BudgetShare}, c);
  CHECK(b.n_high == 0);
  CHECK(b.n_low == 27);
  auto d = estimate_counts({134, 1.0, CompositionMode::BudgetShare}, c);
  CHECK(d.n_high == 10);
  CHECK(d.n_low == 0);
}

TEST_CASE("estimate_counts: expected cost within budget") {
  Rng rng(11);
  for (int t = 0; t < 500; ++t) {
    CostModel c{rng.uniform(0.5, 3.0), 0.0};
    c.avg_cost_high = c.avg_cost_low * rng.uniform(1.1, 5.0);
    DatasetBudgetSpec spec{rng.uniform(1.0, 500.0), rng.uniform(),
                           rng.uniform() < 0.5 ? CompositionMode::BudgetShare : CompositionMode::CountShare};
    auto n = estimate_counts(spec, c);
    CHECK(static_cast<double>(n.n_low) * c.avg_cost_low + static_cast<double>(n.n_high) * c.avg_cost_high <=
          spec.budget_db * (1 + 1e-9));
  }
  // count share: 1/2 of the samples high
  auto n = estimate_counts({100, 0.5, CompositionMode::CountShare}, CostModel{1.0, 3.0});
  CHECK(n.n_low + n.n_high == 50);
  CHECK(n.n_high == 25);
}

TEST_CASE("validate rejects bad specs") {
  CHECK_THROWS_AS(validate(DatasetBudgetSpec{0.0, 0.5}), ConfigError);
  CHECK_THROWS_AS(validate(DatasetBudgetSpec{-1.0, 0.5}), ConfigError);
  CHECK_THROWS_AS(validate(DatasetBudgetSpec{10.0, 1.5}), ConfigError);
  CHECK_THROWS_AS(validate(DatasetBudgetSpec{10.0, -0.1}), ConfigError);
  CHECK_THROWS_AS(parse_composition_mode("half"), ConfigError);
  CHECK(parse_composition_mode("count_share") == CompositionMode::CountShare);
}

TEST_CASE("compose: hand-traced example pool") {
  // avg costs 1.0 / 3.1 -> n_high = floor(3/3.1) = 0, n_low = floor(2/1) = 2.
  // The draw picks two lows; the fill then gives
  //   {0,1} (1.9): H0 fits the 3.1 slack with share 3/4.9 -> {0,1}+H0
  //   {0,2} (2.1): no high fits, L1 fits             -> {0,1,2}
  //   {1,2} (2.0): H0 fills the slack exactly         -> {1,2}+H0
  auto pool = hand_pool();
  DatasetBudgetSpec spec{5.0, 0.6, CompositionMode::BudgetShare};
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    auto s = compose_dataset(pool, spec, seed);
    check_well_formed(s, pool, spec);
    std::string key;
    for (int id : s.low_ids) key += "L" + std::to_string(id);
    for (int id : s.high_ids) key += "H" + std::to_string(id);
    seen.insert(key);
  }
  CHECK(seen == std::set<std::string>{"L0L1H0", "L0L1L2", "L1L2H0"});
  // the H0 outcomes hit the share closely
  auto s = Selection{{1, 2}, {0}, 0, 0};
  refresh_totals(s, pool, CompositionMode::BudgetShare);
  CHECK(s.total_cost == doctest::Approx(5.0));
  CHECK(s.achieved_dc == doctest::Approx(0.6));
}

TEST_CASE("compose: boundary compositions") {
  Rng rng(3);
  auto pool = random_pool(rng, 30);
  auto s0 = compose_dataset(pool, {20.0, 0.0}, 1);
  CHECK(s0.high_ids.empty());
  CHECK(s0.achieved_dc == 0.0);
  auto s1 = compose_dataset(pool, {20.0, 1.0}, 1);
  CHECK(s1.low_ids.empty());
  CHECK(s1.achieved_dc == 1.0);
}

TEST_CASE("compose: unconstrained budget takes the whole pool") {
  Rng rng(4);
  auto pool = random_pool(rng, 10);
  double total = 0, high = 0;
  for (const auto& p : pool) {
    total += p.cost;
    if (p.fidelity == Fidelity::High) high += p.cost;
  }
  auto s = compose_dataset(pool, {total * 1.5, 0.3}, 9);
  CHECK(s.size() == pool.size());
  CHECK(s.achieved_dc == doctest::Approx(high / total));
}

TEST_CASE("compose: errors") {
  std::vector<PoolSample> empty;
  CHECK_THROWS_AS(compose_dataset(empty, {5.0, 0.5}, 0), PoolError);
  // nothing affordable
  CHECK_THROWS_AS(compose_dataset(hand_pool(), {0.5, 0.5}, 0), PoolError);
  auto dup = hand_pool();
  dup.push_back({0, Fidelity::Low, 1.0});
  CHECK_THROWS_AS(compose_dataset(dup, {5.0, 0.5}, 0), ContractError);
}

TEST_CASE("compose: 1000 randomized calls stay feasible and maximal") {
  Rng rng(2024);
  for (int t = 0; t < 1000; ++t) {
    auto pool = random_pool(rng, 3 + static_cast<int>(rng.index(40)), 0.1);
    double total = 0.0;
    for (const auto& p : pool) total += p.cost;
    DatasetBudgetSpec spec{rng.uniform(2.0, total * 1.1), rng.index(4) == 0 ? static_cast<double>(rng.index(2)) : rng.uniform(),
                           rng.uniform() < 0.8 ? CompositionMode::BudgetShare : CompositionMode::CountShare};
    Selection s;
    try {
      s = compose_dataset(pool, spec, rng.next());
    } catch (const PoolError&) {
      // only legal when no eligible sample fits
      for (const auto& p : pool) CHECK_FALSE((eligible(p, spec.composition_dc) && p.cost <= spec.budget_db));
      continue;
    }
    check_well_formed(s, pool, spec);
  }
}

TEST_CASE("compose: within one sample cost of the knapsack optimum on small pools") {
  Rng rng(77);
  for (int t = 0; t < 200; ++t) {
    auto pool = random_pool(rng, 3 + static_cast<int>(rng.index(4)));  // <= 12 samples
    REQUIRE(pool.size() <= 12);
    double total = 0.0, max_cost = 0.0;
    for (const auto& p : pool) {
      total += p.cost;
      max_cost = std::max(max_cost, p.cost);
    }
    DatasetBudgetSpec spec{rng.uniform(2.0, total), rng.uniform()};
    auto s = compose_dataset(pool, spec, rng.next());
    check_well_formed(s, pool, spec);
    CHECK(s.total_cost >= knapsack_optimum(pool, spec.budget_db, spec.composition_dc) - max_cost);
  }
}

TEST_CASE("compose: achieved share close to the target on a large pool") {
  Rng rng(5);
  auto pool = random_pool(rng, 300);
  double max_cost = 0.0;
  for (const auto& p : pool) max_cost = std::max(max_cost, p.cost);
  for (double dc : {0.1, 0.25, 0.5, 0.75, 0.9})
    for (double db : {40.0, 100.0, 250.0}) {
      auto s = compose_dataset(pool, {db, dc}, 17);
      CHECK(std::abs(s.achieved_dc - dc) <= max_cost / db);
    }
}

TEST_CASE("compose: deterministic given the seed") {
  Rng rng(8);
  auto pool = random_pool(rng, 40);
  DatasetBudgetSpec spec{35.0, 0.4};
  CHECK(compose_dataset(pool, spec, 5) == compose_dataset(pool, spec, 5));
  bool differs = false;
  for (std::uint64_t seed = 6; seed < 16; ++seed) differs |= !(compose_dataset(pool, spec, seed) == compose_dataset(pool, spec, 5));
  CHECK(differs);
}

TEST_CASE("greedy_repair: whole pool at half its cost") {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    auto pool = random_pool(rng, 2 + static_cast<int>(rng.index(5)));
    Selection all;
    double total = 0.0, max_cost = 0.0;
    for (const auto& p : pool) {
      (p.fidelity == Fidelity::High ? all.high_ids : all.low_ids).push_back(p.case_id);
      total += p.cost;
      max_cost = std::max(max_cost, p.cost);
    }
    DatasetBudgetSpec spec{total / 2, rng.uniform(0.05, 0.95)};
    auto s = greedy_repair(all, pool, spec);
    check_well_formed(s, pool, spec);
    CHECK(s.total_cost >= knapsack_optimum(pool, spec.budget_db, spec.composition_dc) - max_cost);
  }
}

TEST_CASE("greedy_repair: hand example") {
  // all five samples (9.2) into Db = 5, Dc = 0.6.
  // share 6.2/9.2 > 0.6 -> drop a high; H0 (3.0) leaves 6.2, H1 (3.2) leaves 6.0, neither feasible,
  //   so the largest, H1, goes. share 3/6 = 0.5 < 0.6 -> drop a low: L1 (0.9) leaves 5.1,
  //   L0 (1.0) leaves 5.0 <= 5 -> remove L0. Nothing fits the zero slack.
  auto pool = hand_pool();
  Selection all{{0, 1, 2}, {0, 1}, 0, 0};
  auto s = greedy_repair(all, pool, {5.0, 0.6});
  CHECK(s.low_ids == std::vector<int>{1, 2});
  CHECK(s.high_ids == std::vector<int>{0});
  CHECK(s.total_cost == doctest::Approx(5.0));
}

TEST_CASE("greedy_repair: empty selection is filled to maximality") {
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    auto pool = random_pool(rng, 5);
    DatasetBudgetSpec spec{rng.uniform(3.0, 20.0), rng.uniform()};
    auto s = greedy_repair(Selection{}, pool, spec);
    check_well_formed(s, pool, spec);
  }
}

TEST_CASE("greedy_repair: idempotent and a fixed point on composed selections") {
  Rng rng(14);
  for (int t = 0; t < 200; ++t) {
    auto pool = random_pool(rng, 4 + static_cast<int>(rng.index(20)));
    DatasetBudgetSpec spec{rng.uniform(5.0, 40.0), rng.uniform()};
    Selection start;
    for (const auto& p : pool)
      if (rng.uniform() < 0.5) (p.fidelity == Fidelity::High ? start.high_ids : start.low_ids).push_back(p.case_id);
    auto once = greedy_repair(start, pool, spec);
    CHECK(greedy_repair(once, pool, spec) == once);
    auto composed = compose_dataset(pool, spec, t);
    CHECK(greedy_repair(composed, pool, spec) == composed);
  }
}

TEST_CASE("greedy_repair: unknown or duplicate ids") {
  auto pool = hand_pool();
  CHECK_THROWS_AS(greedy_repair(Selection{{7}, {}, 0, 0}, pool, {5.0, 0.5}), ContractError);
  CHECK_THROWS_AS(greedy_repair(Selection{{}, {2}, 0, 0}, pool, {5.0, 0.5}), ContractError);
  CHECK_THROWS_AS(greedy_repair(Selection{{1, 1}, {}, 0, 0}, pool, {5.0, 0.5}), ContractError);
}

TEST_CASE("selection file round trip") {
  Rng rng(15);
  auto pool = random_pool(rng, 20);
  auto s = compose_dataset(pool, {25.0, 0.5}, 3);
  auto text = selection_csv(s, pool);
  CHECK(text.rfind("case_id,fidelity,cost\n", 0) == 0);
  CHECK(parse_selection(text, pool, CompositionMode::BudgetShare) == s);
  // a row naming an unknown case reports its line
  auto bad = text;
  bad.insert(bad.find('\n') + 1, "999,low,1.0\n");
  try {
    parse_selection(bad, pool, CompositionMode::BudgetShare);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("selection file round trip through a pool on disk") {
  const auto& pool = testutil::small_pool();
  auto s = compose_dataset(pool, {pool.cost_model.avg_cost_high * 4, 0.5}, 1);
  testutil::TempDir d("selection");
  save_selection(s, pool, d.path / "sel.csv");
  CHECK(load_selection(d.path / "sel.csv", pool) == s);
}
