#include "offload/experiment.hpp"
#include "util.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace offload;
using namespace offload::testing;

namespace {

ExperimentSpec tiny_spec() {
  ExperimentSpec s;
  s.id = "tiny";
  s.scenario = nlohmann::json::parse(R"({"n_cells":2,"users_per_cell":1,"n_tx":1,"n_rx":1})");
  s.seeds = {2, 3};
  s.sweep = "t_max_s";
  s.grid = {0.2, 0.3};
  s.schemes = {"joint", "equal-backhaul", "equal-cloud", "equal-both"};
  return s;
}

std::string csv_of(const ExperimentSpec& s, int jobs) {
  std::ostringstream os;
  write_csv(os, s, run_experiment(s, jobs));
  return os.str();
}

}  // namespace

TEST(Spec, EmptySeedsRejected) {
  ExperimentSpec s = tiny_spec();
  s.seeds.clear();
  EXPECT_THROW(validate_spec(s), SpecError);
}

TEST(Spec, NonIncreasingGridRejected) {
  ExperimentSpec s = tiny_spec();
  s.grid = {0.2, 0.2};
  EXPECT_THROW(validate_spec(s), SpecError);
  s.grid = {0.3, 0.2};
  EXPECT_THROW(validate_spec(s), SpecError);
}

TEST(Spec, UnknownNamesRejected) {
  ExperimentSpec s = tiny_spec();
  s.schemes = {"joint", "magic"};
  EXPECT_THROW(validate_spec(s), SpecError);
  s = tiny_spec();
  s.sweep = "n0";
  EXPECT_THROW(validate_spec(s), SpecError);
  EXPECT_THROW(experiment_spec("fig99"), SpecError);
}

TEST(Spec, BuiltInSpecsValidate) {
  for (const char* id : {"fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10"}) {
    ExperimentSpec s = experiment_spec(id);
    EXPECT_NO_THROW(validate_spec(s)) << id;
    EXPECT_NO_THROW(point_config(s, s.grid.front(), s.levels.empty() ? std::nullopt
                                                                        : std::optional<double>(s.levels.front())))
        << id;
  }
}

TEST(Seeds, ParsesRangesAndLists) {
  EXPECT_EQ(parse_seeds("1..3"), (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(parse_seeds("5"), (std::vector<std::uint64_t>{5}));
  EXPECT_EQ(parse_seeds("1..2,7,9"), (std::vector<std::uint64_t>{1, 2, 7, 9}));
  EXPECT_THROW(parse_seeds("3..1"), SpecError);
  EXPECT_THROW(parse_seeds("x"), SpecError);
  EXPECT_THROW(parse_seeds("1.5"), SpecError);
}

TEST(PointConfig, AppliesSweepAndLevel) {
  ExperimentSpec s = experiment_spec("fig5");
  SystemConfig c = point_config(s, 2.0, std::nullopt);
  EXPECT_DOUBLE_EQ(c.w_ul, 2.0 * c.w_dl);
  s = experiment_spec("fig6");
  c = point_config(s, 0.07, 1e9);
  for (double t : c.t_max) EXPECT_DOUBLE_EQ(t, 0.07);
  for (int n = 0; n < c.n_cells; ++n) EXPECT_DOUBLE_EQ(c.c_ul[n], 1e9);
}

TEST(Csv, NumberFormat) {
  EXPECT_EQ(fmt_num(1.5), "1.5000000000e+00");
  EXPECT_EQ(fmt_num(kInf), "inf");
  EXPECT_EQ(fmt_num(std::nan("")), "nan");
}

TEST(Csv, HeaderAndRows) {
  ExperimentSpec s = tiny_spec();
  Row r;
  r.sweep = 0.2;
  r.scheme = "joint";
  r.seed = 3;
  r.energy = 2;
  r.latency = 0.1;
  r.iterations = 7;
  r.status = "delta-met";
  std::ostringstream os;
  write_csv(os, s, {r});
  std::istringstream in(os.str());
  std::string l1, l2, l3, l4;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  std::getline(in, l4);
  EXPECT_EQ(l1, "# offload-csv v1");
  EXPECT_EQ(l2.rfind("# spec {", 0), 0u);
  EXPECT_EQ(l3, "sweep,scheme,seed,energy_J,latency_s,iterations,status,aux");
  EXPECT_EQ(l4, "2.0000000000e-01,joint,3,2.0000000000e+00,1.0000000000e-01,7,delta-met,0.0000000000e+00");
}

TEST(Summary, AveragesFiniteSeedsOnly) {
  std::vector<Row> rows(3);
  for (auto& r : rows) {
    r.sweep = 1;
    r.scheme = "joint";
  }
  rows[0].energy = 2;
  rows[1].energy = 4;
  rows[0].latency = rows[1].latency = 0.5;
  rows.push_back(rows[0]);
  rows.back().status = "iterate";
  auto s = summarize(rows);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].n, 3);
  EXPECT_EQ(s[0].n_ok, 2);
  EXPECT_DOUBLE_EQ(s[0].energy, 3);
}

TEST(Baselines, EqualSharesAreExact) {
  SystemConfig c = small_config(2, 2, 1, 3);
  c.t_max.assign(c.n_users(), 0.5);
  ChannelSet ch = generate_channels(c, 3);
  RunReport r = baseline_allocate("equal-both", c, ch);
  ASSERT_TRUE(r.ok()) << r.termination;
  for (int u = 0; u < c.n_users(); ++u) {
    EXPECT_EQ(r.final.f(u), 1.0 / 4);
    EXPECT_EQ(r.final.c_ul(u), 1.0 / 2);
    EXPECT_EQ(r.final.c_dl(u), 1.0 / 2);
  }
  RunReport e = baseline_allocate("equal-cloud", c, ch);
  ASSERT_TRUE(e.ok());
  EXPECT_LE(e.final.f.sum(), 1 + 1e-12);
  for (int n = 0; n < c.n_cells; ++n) {
    double s = 0;
    for (int k = 0; k < c.users_per_cell; ++k) s += e.final.c_ul(c.user(n, k));
    EXPECT_LE(s, 1 + 1e-9);
  }
  EXPECT_THROW(baseline_allocate("equal-nothing", c, ch), std::invalid_argument);
}

TEST(Run, JointNeverAboveRestrictedAllocations) {
  ExperimentSpec s = tiny_spec();
  std::vector<Row> rows = run_experiment(s, 1);
  std::map<std::tuple<double, std::uint64_t, std::string>, double> e;
  for (const auto& r : rows) e[{r.sweep, r.seed, r.scheme}] = r.energy;
  for (double x : s.grid)
    for (auto seed : s.seeds) {
      double j = e[{x, seed, "joint"}];
      for (const char* k : {"equal-backhaul", "equal-cloud", "equal-both"}) {
        double b = e[{x, seed, k}];
        if (std::isfinite(b)) {
          EXPECT_LE(j, b * (1 + 1e-3)) << x << " " << seed << " " << k;
        }
      }
    }
}

TEST(Run, OutputIsDeterministicAcrossThreadCounts) {
  ExperimentSpec s = tiny_spec();
  s.grid = {0.3};
  std::string a = csv_of(s, 1), b = csv_of(s, 2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 3 + 2 * 4);
}
