#include "offload/scenario.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

using namespace offload;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("offload_test_" + name)).string();
}

double mean_power(const std::vector<CMat>& ms) {
  double s = 0;
  long n = 0;
  for (const auto& m : ms) {
    s += m.squaredNorm();
    n += m.size();
  }
  return s / static_cast<double>(n);
}

}  // namespace

TEST(Channels, DeterministicForSeed) {
  SystemConfig c = default_config();
  ChannelSet a = generate_channels(c, 7), b = generate_channels(c, 7), d = generate_channels(c, 8);
  for (int u = 0; u < c.n_users(); ++u)
    for (int n = 0; n < c.n_cells; ++n) {
      EXPECT_EQ(a.ul[u][n], b.ul[u][n]);
      EXPECT_EQ(a.dl[u][n], b.dl[u][n]);
    }
  EXPECT_NE(a.ul[0][0], d.ul[0][0]);
}

TEST(Channels, UnitVarianceAtZeroDb) {
  SystemConfig c;
  c.pathloss_direct_db = 0;
  c.n_cells = 1;
  c.users_per_cell = 50;
  c.n_tx = c.n_rx = 10;
  fill_defaults(c);
  ChannelSet ch = generate_channels(c, 1);
  std::vector<CMat> d;
  for (int u = 0; u < c.n_users(); ++u) d.push_back(ch.h_direct(c, u));
  EXPECT_NEAR(mean_power(d), 1.0, 0.05);  // 5000 draws
}

TEST(Channels, DirectToCrossGapIsTenDb) {
  SystemConfig c;
  c.users_per_cell = 100;
  c.n_tx = c.n_rx = 6;
  fill_defaults(c);
  ChannelSet ch = generate_channels(c, 2);
  std::vector<CMat> d, x;
  for (int u = 0; u < c.n_users(); ++u)
    for (int n = 0; n < c.n_cells; ++n) (n == c.cell_of(u) ? d : x).push_back(ch.ul[u][n]);
  EXPECT_NEAR(mean_power(d) / mean_power(x), 10.0, 1.0);
}

TEST(Channels, HalfPowerAtThreeDb) {
  SystemConfig c;
  c.pathloss_direct_db = 3.0103;
  c.n_cells = 1;
  c.users_per_cell = 50;
  c.n_tx = c.n_rx = 10;
  fill_defaults(c);
  ChannelSet ch = generate_channels(c, 3);
  std::vector<CMat> d;
  for (int u = 0; u < c.n_users(); ++u) d.push_back(ch.h_direct(c, u));
  EXPECT_NEAR(mean_power(d), 0.5, 0.025);
}

TEST(Channels, StackedMatrixBlocks) {
  SystemConfig c = default_config();
  ChannelSet ch = generate_channels(c, 4);
  for (int u = 0; u < c.n_users(); ++u)
    for (int n = 0; n < c.n_cells; ++n)
      EXPECT_EQ(CMat(ch.g_stacked[u].middleCols(n * c.n_tx, c.n_tx)), ch.dl[u][n]);
}

TEST(Scenario, EmptyFileGivesDefaults) {
  std::string p = temp_path("empty.json");
  { std::ofstream(p) << ""; }
  SystemConfig c = load_scenario(p);
  EXPECT_EQ(c.n_cells, 3);
  EXPECT_EQ(c.users_per_cell, 5);
  EXPECT_EQ(c.n_tx, 2);
  EXPECT_EQ(c.n_rx, 2);
  EXPECT_DOUBLE_EQ(c.w_ul, 10e6);
  EXPECT_DOUBLE_EQ(c.c_ul[0], 100e6);
  EXPECT_DOUBLE_EQ(c.f_cloud, 1e11);
  EXPECT_DOUBLE_EQ(c.d_rx[0], 1e-5);
  EXPECT_DOUBLE_EQ(c.t_max[0], 0.1);
  EXPECT_DOUBLE_EQ(c.kappa, 1e-26);
  EXPECT_DOUBLE_EQ(c.n0, 1e-20);  // -170 dBm/Hz
  EXPECT_DOUBLE_EQ(c.p_ul, 0.01);
  EXPECT_DOUBLE_EQ(c.p_dl, 0.01);
  EXPECT_DOUBLE_EQ(c.sigma_w2, c.n0);
  std::remove(p.c_str());
}

TEST(Scenario, ZeroCellsRejected) {
  try {
    parse_scenario(R"({"n_cells": 0})");
    FAIL() << "expected validation error";
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("n_cells"), std::string::npos);
  }
}

TEST(Scenario, ParseErrorReportsLine) {
  try {
    parse_scenario("{\n  \"n_cells\": 2,\n  \"n_tx\": ,\n}");
    FAIL() << "expected parse error";
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Scenario, UnknownAndMistypedFieldsRejected) {
  EXPECT_THROW(parse_scenario(R"({"n_cell": 2})"), ScenarioError);
  EXPECT_THROW(parse_scenario(R"({"n_cells": "two"})"), ScenarioError);
  EXPECT_THROW(parse_scenario(R"({"c_ul_bps": [1e6, 2e6]})"), ScenarioError);  // 3 cells
}

TEST(Scenario, RoundTripWithBackhaulOverride) {
  SystemConfig c = parse_scenario(R"({"c_ul_bps": 3e6, "t_max_s": 0.2})");
  std::string p = temp_path("rt.json");
  save_scenario(c, p);
  SystemConfig d = load_scenario(p);
  EXPECT_EQ(config_to_json(c), config_to_json(d));
  EXPECT_DOUBLE_EQ(d.c_ul[2], 3e6);
  std::remove(p.c_str());
}

TEST(Scenario, NoiseInDbm) {
  SystemConfig c = parse_scenario(R"({"n0_dbm_per_hz": -170})");
  EXPECT_NEAR(c.n0, 1e-20, 1e-32);
}

TEST(Scenario, NoiseFromDirectSnr) {
  SystemConfig c = parse_scenario(R"({"snr_direct_db": 40})");
  EXPECT_NEAR(c.n0, 1e-23, 1e-35);
  EXPECT_DOUBLE_EQ(c.sigma_w2, c.n0);
  c = parse_scenario(R"({"snr_direct_db": 10, "pathloss_direct_db": 160})");
  EXPECT_NEAR(c.n0, 1e-19, 1e-31);
}

TEST(Workload, DrawnWithinRangeAndDeterministic) {
  SystemConfig c = default_config();
  SystemConfig a = draw_workload(c, 9), b = draw_workload(c, 9);
  EXPECT_EQ(a.b_in, b.b_in);
  for (int u = 0; u < c.n_users(); ++u) {
    EXPECT_GE(a.b_in[u], c.b_min);
    EXPECT_LE(a.b_in[u], c.b_max);
    EXPECT_DOUBLE_EQ(a.v_cycles[u], 330 * a.b_in[u]);
  }
}
