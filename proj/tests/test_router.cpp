#include <doctest.h>

#include <random>
#include <set>

#include "protocolnet/error.hpp"
#include "protocolnet/router.hpp"

using namespace protocolnet;

namespace {

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("p" + std::to_string(i));
  return out;
}

Errc route_error(const Eigen::VectorXd& v, double threshold, std::size_t k) {
  try {
    route(v, names(static_cast<std::size_t>(v.size())), threshold, k);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::IoFailure;
}

}  // namespace

TEST_CASE("worked example") {
  const Eigen::Vector4d logits(2, 1, 1, 0);
  const auto norm = normalize_scores(logits);
  CHECK(norm[0] == doctest::Approx(0.5));
  CHECK(norm[1] == doctest::Approx(0.25));
  CHECK(norm[2] == doctest::Approx(0.25));
  CHECK(norm[3] == 0.0);
  CHECK(compute_delta(norm) == doctest::Approx(0.25));

  const auto ap = route(logits, names(4), 0.25, 3);
  CHECK(ap.mode == RouteMode::AutoProtocol);
  REQUIRE(ap.ranked.size() == 1);
  CHECK(ap.ranked[0].label == "p0");
  CHECK(std::string(route_mode_name(ap.mode)) == "AP");

  const auto cds = route(logits, names(4), 0.26, 3);
  CHECK(cds.mode == RouteMode::DecisionSupport);
  REQUIRE(cds.ranked.size() == 3);
  // Tie between 1 and 2 resolves by index.
  CHECK(cds.ranked[1].index == 1);
  CHECK(cds.ranked[2].index == 2);
  CHECK(cds.threshold_used == 0.26);
  CHECK(std::string(route_mode_name(cds.mode)) == "CDS");
}

TEST_CASE("degenerate inputs") {
  const Eigen::Vector3d flat(4, 4, 4);
  const auto norm = normalize_scores(flat);
  for (int i = 0; i < 3; ++i) CHECK(norm[i] == doctest::Approx(1.0 / 3));
  CHECK(compute_delta(norm) == 0.0);
  CHECK(route(flat, names(3), 0.0, 2).mode == RouteMode::AutoProtocol);

  const Eigen::VectorXd one = Eigen::VectorXd::Constant(1, 1.0);
  CHECK_THROWS_AS(normalize_scores(one), Error);
  Eigen::Vector3d bad(1, std::nan(""), 0);
  CHECK(route_error(bad, 0.1, 1) == Errc::NonFiniteInput);
  bad[1] = std::numeric_limits<double>::infinity();
  CHECK(route_error(bad, 0.1, 1) == Errc::NonFiniteInput);

  const Eigen::Vector3d v(1, 2, 3);
  CHECK(route_error(v, 0.1, 0) == Errc::InvalidK);
  CHECK(route_error(v, 0.1, 4) == Errc::InvalidK);
  CHECK(route_error(v, -0.1, 1) == Errc::ValidationFailure);
  try {
    route(v, names(2), 0.1, 1);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ShapeMismatch);
  }
}

TEST_CASE("k is capped at ten") {
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(12, 0, 1);
  CHECK(route(v, names(12), 2.0, 10).ranked.size() == 10);
  CHECK(route_error(v, 2.0, 11) == Errc::InvalidK);
}

TEST_CASE("random logits: invariants") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal(0.0, 3.0);
  std::uniform_int_distribution<int> size(2, 40);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = size(rng);
    Eigen::VectorXd v(n);
    for (auto& x : v) x = normal(rng);
    const auto norm = normalize_scores(v);
    Eigen::Index arg_raw = 0, arg_norm = 0;
    v.maxCoeff(&arg_raw);
    norm.maxCoeff(&arg_norm);
    CHECK(arg_raw == arg_norm);
    CHECK(std::abs(norm.minCoeff()) < 1e-9);
    CHECK(std::abs(norm.sum() - 1.0) < 1e-9);
    const double delta = compute_delta(norm);
    CHECK(delta >= 0.0);
    CHECK(delta <= 1.0);

    CHECK(route(v, names(static_cast<std::size_t>(n)), 0.0, 1).mode == RouteMode::AutoProtocol);
    CHECK(route(v, names(static_cast<std::size_t>(n)), 1.0 + 1e-9, 1).mode == RouteMode::DecisionSupport);

    // k = n gives a permutation, sorted by score.
    const auto all = route(v, names(static_cast<std::size_t>(n)), 2.0, std::min<std::size_t>(n, kMaxTopK));
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < all.ranked.size(); ++i) {
      seen.insert(all.ranked[i].index);
      if (i) CHECK(all.ranked[i - 1].score >= all.ranked[i].score);
    }
    CHECK(seen.size() == all.ranked.size());
    CHECK(all.ranked[0].index == static_cast<std::size_t>(arg_raw));

    const auto order = rank_order(v);
    CHECK(std::set<std::size_t>(order.begin(), order.end()).size() == static_cast<std::size_t>(n));
  }
}

TEST_CASE("AP is monotone in the threshold") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 2.0);
  Eigen::VectorXd v(8);
  for (int trial = 0; trial < 200; ++trial) {
    for (auto& x : v) x = normal(rng);
    bool was_ap = true;
    for (double t = 0.0; t <= 1.01; t += 0.01) {
      const bool ap = route(v, names(8), t, 5).mode == RouteMode::AutoProtocol;
      if (!was_ap) CHECK_FALSE(ap);
      was_ap = ap;
    }
  }
}
