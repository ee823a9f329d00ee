#include "offload/oracle.hpp"
#include "util.hpp"

#include <gtest/gtest.h>

using namespace offload;
using namespace offload::testing;

namespace {

// Scheduling workload: 1 Mbit in and out, 1e9 cycles, 20 dB direct SNR.
SystemConfig sched_config(double t, double c_bps = 1e8) {
  char buf[300];
  std::snprintf(buf, sizeof buf,
                R"({"n_cells":2,"users_per_cell":2,"b_in_bits":1e6,"b_out_bits":1e6,"v_cycles":1e9,)"
                R"("snr_direct_db":20,"t_max_s":%g,"c_ul_bps":%g,"c_dl_bps":%g})",
                t, c_bps, c_bps);
  return parse_scenario(buf);
}

std::vector<int> all_users(const SystemConfig& c) {
  std::vector<int> v(c.n_users());
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST(ComputeW, ZeroSlacksGiveZero) {
  Vec x = Vec::Zero(3), y = Vec::Zero(3);
  Vec w = compute_w(x, y, {0, 1, 2});
  EXPECT_EQ(w, Vec::Zero(3));
}

TEST(ComputeW, NormalizesEachBlock) {
  Vec x(2), y = Vec::Zero(2);
  x << 1, 3;
  Vec w = compute_w(x, y, {0, 1});
  EXPECT_DOUBLE_EQ(w(0), 0.25);
  EXPECT_DOUBLE_EQ(w(1), 0.75);
}

TEST(ComputeW, PositiveSlacksSumToTwo) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    Vec x(4), y(4);
    for (int k = 0; k < 4; ++k) {
      x(k) = uniform(rng, 0.01, 1);
      y(k) = uniform(rng, 0.01, 1);
    }
    EXPECT_NEAR(compute_w(x, y, {0, 1, 2, 3}).sum(), 2.0, 1e-12);
  }
}

TEST(ComputeW, OutsideSubsetIsZero) {
  Vec x = Vec::Ones(3), y = Vec::Ones(3);
  Vec w = compute_w(x, y, {0, 2});
  EXPECT_EQ(w(1), 0);
  EXPECT_DOUBLE_EQ(w(0) + w(2), 2.0);
}

TEST(SolveP5, GenerousBudgetsDriveSlacksToZero) {
  SystemConfig c = sched_config(1.0);
  for (auto& e : c.v_cycles) e = 3e9;  // E^M = kappa V^3 / T^2 = 270 J
  ChannelSet ch = generate_channels(c, 1);
  P5Result r = solve_p5(c, ch, all_users(c));
  for (int u = 0; u < c.n_users(); ++u) {
    EXPECT_LE(r.x(u), 1e-6) << u;
    EXPECT_LE(r.y(u), 1e-6) << u;
  }
}

TEST(SolveP5, ZeroDeadlineLeavesLatencySlack) {
  SystemConfig c = sched_config(1e-9);
  ChannelSet ch = generate_channels(c, 1);
  P5Result r = solve_p5(c, ch, all_users(c));
  for (int u = 0; u < c.n_users(); ++u) {
    int n = c.cell_of(u);
    double floor = c.b_in[u] / c.c_ul[n] + c.b_out[u] / c.c_dl[n] + c.v_cycles[u] / c.f_cloud - c.t_max[u];
    EXPECT_GT(r.x(u), 0);
    EXPECT_GE(r.x(u), floor * (1 - 1e-9));
  }
}

TEST(SolveP5, SlacksMatchDirectConstraintCheck) {
  SystemConfig c = sched_config(0.07);
  ChannelSet ch = generate_channels(c, 2);
  P5Result r = solve_p5(c, ch, all_users(c));
  Vec x, y;
  slack_violations(c, ch, r.z, x, y);
  EXPECT_EQ(x, r.x);
  EXPECT_EQ(y, r.y);
  for (int u = 0; u < c.n_users(); ++u) {
    double lat = latency_components(c, ch, r.z, u).total();
    EXPECT_NEAR(r.x(u), std::max(0.0, lat - c.t_max[u]), 1e-15);
  }
  for (double v : r.report.residual) EXPECT_LE(v, 1e-8);
}

// No point of a coarse power grid (shares held at the returned values) beats the
// returned l_p objective.
TEST(SolveP5, LpObjectiveNotAboveScalarGrid) {
  SystemConfig c = parse_scenario(
      R"({"n_cells":2,"users_per_cell":1,"n_tx":1,"n_rx":1,"b_in_bits":1e6,"b_out_bits":1e6,)"
      R"("v_cycles":1e9,"snr_direct_db":20,"t_max_s":0.06})");
  ChannelSet ch = generate_channels(c, 4);
  ScheduleSettings s;
  P5Result r = solve_p5(c, ch, {0, 1}, s);
  double best = kInf;
  Iterate z = r.z;
  for (int a = 1; a <= 40; ++a)
    for (int b = 1; b <= 40; ++b) {
      z.q_ul[0](0, 0) = c.p_ul * a / 40.0;
      z.q_ul[1](0, 0) = c.p_ul * b / 40.0;
      Vec x, y;
      slack_violations(c, ch, z, x, y);
      best = std::min(best, lp_objective(x, y, s.p, s.eps));
    }
  EXPECT_LE(lp_objective(r.x, r.y, s.p, s.eps), best + 1e-6);
}

TEST(FeasibilityTest, EmptySubsetIsFeasible) {
  SystemConfig c = sched_config(0.1);
  ChannelSet ch = generate_channels(c, 1);
  EXPECT_TRUE(feasibility_test(c, ch, {}));
}

TEST(FeasibilityTest, SingleUserWithGenerousBudgets) {
  SystemConfig c = sched_config(1.0);
  for (auto& e : c.v_cycles) e = 3e9;
  ChannelSet ch = generate_channels(c, 1);
  EXPECT_TRUE(feasibility_test(c, ch, {0}));
}

TEST(FeasibilityTest, ZeroDeadlineFails) {
  SystemConfig c = sched_config(1e-9);
  ChannelSet ch = generate_channels(c, 1);
  EXPECT_FALSE(feasibility_test(c, ch, {0}));
}

TEST(FeasibilityTest, AgreesWithResidualsOfReturnedIterate) {
  SystemConfig c = sched_config(0.09);
  ChannelSet ch = generate_channels(c, 3);
  P5Result r;
  bool ok = feasibility_test(c, ch, all_users(c), {}, &r);
  bool direct = true;
  for (int u = 0; u < c.n_users(); ++u) {
    double lat = latency_components(c, ch, r.z, u).total() - c.t_max[u];
    double e = r.z.q_ul[u].trace().real() - local_energy(c, u) / c.b_in[u] * uplink_rate(c, ch, r.z, u);
    direct = direct && lat < 1e-5 && e < 1e-5;
  }
  EXPECT_EQ(ok, direct);
}

TEST(Schedule, EveryoneAdmittedWhenTriviallyFeasible) {
  SystemConfig c = sched_config(1.0);
  for (auto& e : c.v_cycles) e = 3e9;
  ChannelSet ch = generate_channels(c, 1);
  ScheduleResult r = schedule(c, ch);
  EXPECT_EQ(r.s, c.n_users());
  EXPECT_EQ(r.probes.size(), 1u);
}

TEST(Schedule, ZeroDeadlineAdmitsNobody) {
  SystemConfig c = sched_config(1e-9);
  ChannelSet ch = generate_channels(c, 1);
  ScheduleResult r = schedule(c, ch);
  EXPECT_EQ(r.s, 0);
  EXPECT_TRUE(r.selected.empty());
}

TEST(Schedule, SelectionIsPrefixOfPermutation) {
  SystemConfig c = sched_config(0.07);
  ChannelSet ch = generate_channels(c, 2);
  ScheduleResult r = schedule(c, ch);
  ASSERT_GE(r.s, 0);
  ASSERT_LE(r.s, c.n_users());
  EXPECT_EQ(r.selected, prefix(r.perm, r.s));
  for (size_t k = 1; k < r.perm.size(); ++k) EXPECT_LE(r.w(r.perm[k - 1]), r.w(r.perm[k]));
  for (const auto& p : r.probes) EXPECT_LE(p.count, c.n_users());
}

TEST(Schedule, SelectedUsersSaveEnergy) {
  SystemConfig c = sched_config(0.09);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ChannelSet ch = generate_channels(c, seed);
    ScheduleResult r = schedule(c, ch);
    for (int u : r.selected) EXPECT_TRUE(energy_advantage_ok(c, ch, r.solution, u, 1e-5)) << seed << " " << u;
  }
}

TEST(Schedule, CloseToExhaustiveSearch) {
  SystemConfig c = sched_config(0.07);
  double d = 0;
  int n = 4;
  for (int seed = 1; seed <= n; ++seed) {
    ChannelSet ch = generate_channels(c, seed);
    d += std::abs(schedule(c, ch).s - exhaustive_schedule(c, ch).s);
  }
  EXPECT_LE(d / n, 1.0);
}
