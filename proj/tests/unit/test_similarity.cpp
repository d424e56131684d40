#include <cmath>
#include <functional>
#include <limits>

#include <doctest.h>

#include "rttlab/error.hpp"
#include "rttlab/similarity.hpp"
#include "synthetic.hpp"

using namespace rttlab;

namespace {

// Minimum cost over every monotone alignment path from (0,0) to (n-1,m-1).
double brute_force_dtw(const std::vector<double>& a, const std::vector<double>& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    acc += std::abs(a[i] - b[j]);
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < a.size()) walk(i + 1, j, acc);
    if (j + 1 < b.size()) walk(i, j + 1, acc);
    if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

LibraryEntry entry_with(const std::string& context, std::vector<double> fingerprint) {
  LibraryEntry e;
  e.model.weights = init_weights({1, 2, 0.5, {}}, 1);
  e.model.metadata.context = context;
  e.fingerprint = std::move(fingerprint);
  return e;
}

}  // namespace

TEST_CASE("dtw examples") {
  CHECK(dtw(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}).cost == 0.0);
  CHECK(dtw(std::vector<double>{0}, std::vector<double>{5}).cost == 5.0);
  CHECK(dtw(std::vector<double>{1, 2}, std::vector<double>{1, 1, 2}).cost == 0.0);
  const auto r = dtw(std::vector<double>{0}, std::vector<double>{5});
  CHECK(r.normalized == 2.5);
  CHECK(r.path_length == 1);
  CHECK_THROWS_AS(dtw(std::vector<double>{}, std::vector<double>{1}), Error);
}

TEST_CASE("dtw agrees with exhaustive path enumeration") {
  Rng rng(2024);
  std::uniform_int_distribution<int> len(1, 6);
  std::uniform_int_distribution<int> small(-3, 3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> a(static_cast<std::size_t>(len(rng))), b(static_cast<std::size_t>(len(rng)));
    for (auto& v : a) v = small(rng);
    for (auto& v : b) v = small(rng);
    CHECK(dtw(a, b).cost == brute_force_dtw(a, b));
  }
}

TEST_CASE("dtw is symmetric and zero on itself") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = testing::uniform(30 + s, -2, 2, s);
    const auto b = testing::uniform(17 + 2 * s, -2, 2, s + 100);
    CHECK(dtw(a, b).cost == dtw(b, a).cost);
    CHECK(dtw(a, b).normalized == dtw(b, a).normalized);
    CHECK(dtw(a, a).cost == 0.0);
  }
}

TEST_CASE("select_source") {
  const auto target_raw = testing::ar1(300, 0.9, 40, 5, 1);
  const RttTrace target{target_raw, 500, "t"};
  const auto target_std = standardize(target_raw).values;

  SUBCASE("an exact fingerprint wins with distance 0") {
    ModelLibrary lib;
    lib.add(entry_with("noise", standardize(testing::white_noise(300, 0, 1, 2)).values));
    lib.add(entry_with("same", target_std));
    const auto sel = select_source(lib, target);
    CHECK(sel.index == 1);
    CHECK(sel.normalized_dtw == 0.0);
    CHECK(sel.distances.size() == 2);
  }
  SUBCASE("a single entry is always chosen") {
    ModelLibrary lib;
    lib.add(entry_with("far", std::vector<double>(50, 100.0)));
    CHECK(select_source(lib, target).index == 0);
  }
  SUBCASE("ties go to the earliest entry") {
    ModelLibrary lib;
    lib.add(entry_with("a", target_std));
    lib.add(entry_with("b", target_std));
    CHECK(select_source(lib, target).index == 0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(select_source(ModelLibrary{}, target), Error);
    ModelLibrary lib;
    lib.add(entry_with("a", target_std));
    CHECK_THROWS_AS(select_source(lib, RttTrace{std::vector<double>(20, 4.0), 500, ""}), Error);
    CHECK_THROWS_AS(lib.add(entry_with("a", target_std)), Error);
  }
}
