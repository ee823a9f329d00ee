#include "offload/oracle.hpp"
#include "util.hpp"

#include <gtest/gtest.h>

using namespace offload;
using namespace offload::testing;

namespace {

SystemConfig scalar_pair(std::uint64_t seed, double t = 0.1) {
  char buf[160];
  std::snprintf(buf, sizeof buf, R"({"n_cells":2,"users_per_cell":1,"n_tx":1,"n_rx":1,"t_max_s":%g})", t);
  return draw_workload(parse_scenario(buf), seed);
}

SystemConfig sched_config(double t) {
  char buf[300];
  std::snprintf(buf, sizeof buf,
                R"({"n_cells":2,"users_per_cell":2,"b_in_bits":1e6,"b_out_bits":1e6,"v_cycles":1e9,)"
                R"("snr_direct_db":20,"t_max_s":%g})",
                t);
  return parse_scenario(buf);
}

}  // namespace

TEST(GridOracle, RejectsUnsupportedShapes) {
  SystemConfig c = small_config(2, 2, 2, 1);
  ChannelSet ch = generate_channels(c, 1);
  EXPECT_THROW(grid_p1(c, ch, 0.1), std::invalid_argument);
}

TEST(GridOracle, FinerGridNeverWorse) {
  for (std::uint64_t seed = 2; seed <= 4; ++seed) {
    SystemConfig c = scalar_pair(seed, 0.3);
    ChannelSet ch = generate_channels(c, seed);
    GridResult a = grid_p1(c, ch, 0.1, false, false), b = grid_p1(c, ch, 0.05, false, false);
    ASSERT_EQ(a.feasible, b.feasible);
    if (a.feasible) {
      EXPECT_LE(b.energy, a.energy * (1 + 1e-12)) << seed;
    }
  }
}

TEST(GridOracle, ReturnedIterateIsFeasibleAndConsistent) {
  SystemConfig c = scalar_pair(3, 0.3);
  ChannelSet ch = generate_channels(c, 3);
  GridResult g = grid_p1(c, ch, 0.05);
  ASSERT_TRUE(g.feasible);
  EXPECT_LE(max_residual(constraint_residuals(c, ch, g.z, Mode::p1)), 1e-9);
  EXPECT_NEAR(total_energy(c, ch, g.z), g.energy, 1e-9 * g.energy);
}

TEST(GridOracle, HybridGridNotAboveCloudOnlyGrid) {
  for (std::uint64_t seed = 2; seed <= 4; ++seed) {
    SystemConfig c = scalar_pair(seed, 0.3);
    ChannelSet ch = generate_channels(c, seed);
    GridResult cloud = grid_p1(c, ch, 0.05, true), hyb = grid_hybrid(c, ch, 0.05);
    if (cloud.feasible) {
      ASSERT_TRUE(hyb.feasible);
      EXPECT_LE(hyb.energy, cloud.energy * (1 + 1e-6)) << seed;
    }
  }
}

TEST(GridOracle, AgreesWithScaOnScalarPairs) {
  int compared = 0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    SystemConfig c = scalar_pair(seed);
    ChannelSet ch = generate_channels(c, seed);
    RunReport r = run(c, ch, SCASettings{});
    GridResult g = grid_p1(c, ch, 0.05);
    EXPECT_EQ(r.ok(), g.feasible) << seed;
    if (!r.ok() || !g.feasible) continue;
    ++compared;
    EXPECT_LE(rel_err(total_energy(c, ch, r.final), g.energy), 1e-3) << seed;
  }
  EXPECT_GE(compared, 2);
}

TEST(EnergyAdvantage, ZeroPowerAlwaysPasses) {
  SystemConfig c = sched_config(0.1);
  ChannelSet ch = generate_channels(c, 1);
  Iterate z = zero_iterate(c);
  for (int u = 0; u < c.n_users(); ++u) EXPECT_TRUE(energy_advantage_ok(c, ch, z, u, 0));
}

TEST(EnergyAdvantage, ThresholdIsRawSlack) {
  SystemConfig c = sched_config(0.1);
  ChannelSet ch = generate_channels(c, 1);
  Iterate z = zero_iterate(c);
  white_covariances(c, z);
  double slack = z.q_ul[0].trace().real() - local_energy(c, 0) / c.b_in[0] * uplink_rate(c, ch, z, 0);
  EXPECT_TRUE(energy_advantage_ok(c, ch, z, 0, slack));
  EXPECT_FALSE(energy_advantage_ok(c, ch, z, 0, slack - 1e-6 * std::abs(slack) - 1e-300));
}

TEST(Exhaustive, TriesEverySubsetWhenNothingIsAdmissible) {
  SystemConfig c = sched_config(1e-9);
  ChannelSet ch = generate_channels(c, 1);
  ExhaustiveResult r = exhaustive_schedule(c, ch);
  EXPECT_EQ(r.s, 0);
  EXPECT_TRUE(r.best.empty());
  EXPECT_EQ(r.subsets_tried, 15);
}

TEST(Exhaustive, StopsAtFullSetWhenAdmissible) {
  SystemConfig c = sched_config(1.0);
  for (auto& v : c.v_cycles) v = 3e9;
  ChannelSet ch = generate_channels(c, 1);
  ExhaustiveResult r = exhaustive_schedule(c, ch);
  EXPECT_EQ(r.s, 4);
  EXPECT_EQ(r.subsets_tried, 1);
  EXPECT_EQ(r.best, (std::vector<int>{0, 1, 2, 3}));
}

TEST(Exhaustive, BestSubsetIsAdmissible) {
  SystemConfig c = sched_config(0.07);
  ChannelSet ch = generate_channels(c, 2);
  ExhaustiveResult r = exhaustive_schedule(c, ch);
  ASSERT_GT(r.s, 0);
  double e = 0;
  EXPECT_TRUE(subset_admissible(c, ch, r.best, SCASettings{}, 1e-5, &e));
  EXPECT_NEAR(e, r.energy, 1e-9 * e);
}
