#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "fourthdown/decision_engine.hpp"

using namespace fourthdown;

namespace {

FourthDownState random_state(std::mt19937_64& rng) {
  FourthDownState s;
  s.yardline = 1 + static_cast<int>(rng() % 99);
  s.ydstogo = 1 + static_cast<int>(rng() % std::min(15, s.yardline));
  s.game_seconds_remaining = 1 + static_cast<int>(rng() % 3600);
  s.score_differential = static_cast<int>(rng() % 57) - 28;
  s.total_score = static_cast<int>(rng() % 60);
  s.posteam_spread = static_cast<double>(rng() % 29) - 14;
  s.posteam_timeouts = static_cast<int>(rng() % 4);
  s.defteam_timeouts = static_cast<int>(rng() % 4);
  s.receive_2h_ko = static_cast<int>(rng() % 2);
  s.home = static_cast<int>(rng() % 2);
  std::normal_distribution<double> nd;
  s.kq = nd(rng);
  s.pq = nd(rng);
  s.delta_tq_off = nd(rng);
  s.delta_tq_def = nd(rng);
  s.opp_kq = nd(rng);
  s.opp_pq = nd(rng);
  return s;
}

TransitionFunctions stub_transitions(double p_make = 0.7, double p_convert = 0.45, double gain = 6.0) {
  TransitionFunctions t;
  t.expected_punt_yardline = [](double y, double pq) { return 140.0 - y + 2.0 * pq; };
  t.p_make = [p_make](double, double) { return p_make; };
  t.p_convert = [p_convert](double, double, double) { return p_convert; };
  t.gain_success = [gain](double, double, double, double) { return gain; };
  t.gain_failure = [](double, double, double) { return 0.0; };
  return t;
}

// WP increasing in score and decreasing in yardline.
double monotone_wp(const WpInput& in) {
  return 1.0 / (1.0 + std::exp(-(0.12 * in.score_differential - 0.02 * (in.yardline - 50))));
}

}  // namespace

TEST_CASE("flip is an involution and applies the score rule") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 500; ++i) {
    const auto s = random_state(rng);
    CHECK(flip(flip(s)) == s);
    const auto f = flip(s);
    CHECK(f.score_differential == -s.score_differential);
    CHECK(f.posteam_spread == -s.posteam_spread);
    CHECK(f.posteam_timeouts == s.defteam_timeouts);
    CHECK(f.receive_2h_ko == 1 - s.receive_2h_ko);
    CHECK(f.game_seconds_remaining == s.game_seconds_remaining);
    CHECK(f.delta_tq_off == s.delta_tq_def);
    CHECK(f.kq == s.opp_kq);
  }
  FourthDownState s;
  s.score_differential = 3;
  CHECK(opponent_first_down(s, 0, 60).score_differential == -3);
  s.score_differential = 5;
  const auto made = opponent_first_down(s, 3, 75);
  CHECK(made.score_differential == -8);
  CHECK(made.total_score == s.total_score + 3);
  CHECK(made.yardline == 75);
  CHECK(made.ydstogo == 10);
  CHECK(opponent_first_down(s, 0, 4).ydstogo == 4);
}

TEST_CASE("composition identities under a constant WP stub") {
  std::mt19937_64 rng(42);
  const WpFunction half = [](const WpInput&) { return 0.5; };
  for (int i = 0; i < 1000; ++i) {
    const auto s = random_state(rng);
    const auto t = stub_transitions(std::uniform_real_distribution<double>()(rng),
                                    std::uniform_real_distribution<double>()(rng), 1 + rng() % 20);
    CHECK(std::abs(wp_punt(s, t, half).wp - 0.5) <= 1e-12);
    CHECK(std::abs(wp_fg(s, t, half).wp - 0.5) <= 1e-12);
    CHECK(std::abs(wp_go(s, t, half).wp - 0.5) <= 1e-12);
  }
  for (int y = 1; y <= 50; ++y) CHECK(wp_fg(FourthDownState{y, 1}, stub_transitions(), half).miss_yardline == std::min(80, 93 - y));
  CHECK(fg_miss_yardline(10) == 80);
  CHECK(fg_miss_yardline(40) == 53);
}

TEST_CASE("mixture collapses and branch selection") {
  std::mt19937_64 rng(43);
  const WpFunction wp1 = monotone_wp;
  for (int i = 0; i < 200; ++i) {
    const auto s = random_state(rng);
    const auto f = wp_fg(s, stub_transitions(1.0), wp1);
    const auto opp = opponent_first_down(s, 3, 75);
    CHECK(f.wp == doctest::Approx(1.0 - monotone_wp(first_down_input(opp, 75))).epsilon(1e-14));
  }
  FourthDownState s;
  s.yardline = 40;
  s.ydstogo = 2;
  const auto g = wp_go(s, stub_transitions(0.7, 1.0, 6.0), wp1);
  CHECK_FALSE(g.touchdown);
  CHECK(g.success_yardline == 34);
  CHECK(g.wp == doctest::Approx(monotone_wp(first_down_input(s, 34))).epsilon(1e-14));

  s.yardline = 2;
  s.ydstogo = 1;
  const auto td = wp_go(s, stub_transitions(0.7, 0.6, 3.0), wp1);
  CHECK(td.touchdown);
  CHECK(td.wp_success == doctest::Approx(1.0 - monotone_wp(first_down_input(opponent_first_down(s, 7, 75), 75))));

  // success gains are never below the line to gain; failure gains stay short of it
  s.yardline = 30;
  s.ydstogo = 8;
  const auto c = wp_go(s, stub_transitions(0.7, 0.5, 3.0), wp1);
  CHECK(c.gain_success == 8.0);
  CHECK(c.gain_failure <= 7.0);
}

TEST_CASE("a better punter weakly helps under a monotone WP") {
  std::mt19937_64 rng(44);
  for (int i = 0; i < 300; ++i) {
    auto s = random_state(rng);
    s.yardline = 31 + static_cast<int>(rng() % 69);
    s.ydstogo = std::min(s.ydstogo, s.yardline);
    auto better = s;
    better.pq = s.pq + 0.5;
    const auto t = stub_transitions();
    CHECK(wp_punt(better, t, monotone_wp).wp >= wp_punt(s, t, monotone_wp).wp);
  }
}

TEST_CASE("availability, argmax and effect size") {
  const WpFunction wp1 = monotone_wp;
  FourthDownState s;
  s.yardline = 60;
  auto v = evaluate(s, stub_transitions(), wp1);
  CHECK_FALSE(v.fg);
  CHECK(v.punt);
  s.yardline = 20;
  v = evaluate(s, stub_transitions(), wp1);
  CHECK(v.fg);
  CHECK_FALSE(v.punt);
  s.yardline = 40;
  v = evaluate(s, stub_transitions(), wp1);
  CHECK(v.fg);
  CHECK(v.punt);
  CHECK(*v.effect_size >= 0.0);
  CHECK(*v.wp(v.best) == std::max({v.go.wp, v.fg->wp, v.punt->wp}));

  DecisionValues d;
  d.go.wp = 0.6;
  d.fg = FgBranches{};
  d.fg->wp = 0.55;
  rank_decisions(d);
  CHECK(d.best == Decision::go);
  CHECK(*d.effect_size == doctest::Approx(0.05));
  CHECK(*signed_gain(d, Decision::field_goal) == doctest::Approx(-0.05));
  CHECK_FALSE(signed_gain(d, Decision::punt));

  Availability none{99, 0};
  v = evaluate(s, stub_transitions(), wp1, none);
  CHECK(v.best == Decision::go);
  CHECK_FALSE(v.effect_size);

  std::mt19937_64 rng(45);
  for (int i = 0; i < 500; ++i) {
    const auto r = evaluate(random_state(rng), stub_transitions(), wp1);
    CHECK(*r.effect_size >= 0.0);
    CHECK(r.wp(r.best));
  }
}

TEST_CASE("state validation reports fields") {
  FourthDownState s;
  s.yardline = 10;
  s.ydstogo = 15;
  auto errors = validation_errors(s);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].field == "ydstogo");
  CHECK(errors[0].message == "ydstogo exceeds yardline");
  s.ydstogo = 5;
  s.posteam_timeouts = 4;
  s.game_seconds_remaining = 0;
  errors = validation_errors(s);
  CHECK(errors.size() == 2);
  CHECK_THROWS_AS(validate(s), InvalidInput);
  CHECK_THROWS_AS(evaluate(s, stub_transitions(), monotone_wp), InvalidInput);
}

TEST_CASE("boundary grid shape and CSV") {
  const auto t = stub_transitions();
  const CellEvaluator eval = [&](const FourthDownState& s) {
    const auto v = evaluate(s, t, monotone_wp);
    GridCell c;
    c.best = v.best;
    c.effect_size = v.effect_size;
    return c;
  };
  const auto cells = boundary_grid(FourthDownState{}, {1, 99}, {1, 10}, eval);
  CHECK(cells.size() == 990);
  int feasible = 0;
  for (const auto& c : cells) feasible += c.feasible;
  CHECK(feasible == 990 - 45);
  const auto& c = cells[4 * 10 + 9];
  CHECK(c.yardline == 5);
  CHECK(c.ydstogo == 10);
  CHECK_FALSE(c.feasible);
  const auto serial = boundary_grid(FourthDownState{}, {1, 99}, {1, 10}, eval, false);
  std::ostringstream a, b;
  write_grid(a, cells);
  write_grid(b, serial);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("y,z,best,effect_size,boot_pct\n1,1,", 0) == 0);
  CHECK(a.str().find("\n5,10,,,\n") != std::string::npos);
  CHECK_THROWS_AS(boundary_grid(FourthDownState{}, {10, 5}, {1, 10}, eval), InvalidInput);
}
