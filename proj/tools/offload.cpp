// offload: experiment runner and single-instance solver.

#include "offload/experiment.hpp"
#include "offload/testing.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace offload;

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return nlohmann::json::object();
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false, true);
  if (j.is_discarded()) {
    parse_scenario(text);  // rethrows with line/column
    throw ScenarioError("cannot parse '" + path + "'");
  }
  if (!j.is_object()) throw ScenarioError("scenario: top level must be an object");
  return j;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    size_t pos = 0;
    double x = std::stod(part, &pos);
    if (pos != part.size()) throw SpecError("bad number '" + part + "'");
    v.push_back(x);
  }
  return v;
}

int cmd_run(const std::string& id, const std::string& seeds, const std::string& out_dir, const std::string& scenario,
            const std::string& grid, int jobs, int max_outer, bool quiet) {
  ExperimentSpec s = experiment_spec(id);
  s.seeds = parse_seeds(seeds);
  if (!scenario.empty()) s.scenario.merge_patch(read_json(scenario));
  if (!grid.empty()) s.grid = parse_list(grid);
  if (max_outer > 0) s.max_outer = max_outer;
  validate_spec(s);
  // resolve once up front so scenario errors surface before any solve
  point_config(s, s.grid.front(), s.levels.empty() ? std::nullopt : std::optional<double>(s.levels.front()));

  std::filesystem::create_directories(out_dir);
  std::vector<Row> rows = run_experiment(s, jobs, [&](const std::vector<Row>& point) {
    if (quiet) return;
    for (const auto& r : point)
      if (r.status != "iterate")
        std::fprintf(stderr, "%s x=%g seed=%llu %s E=%s %s\n", id.c_str(), r.sweep,
                     static_cast<unsigned long long>(r.seed), r.scheme.c_str(), fmt_num(r.energy).c_str(),
                     r.status.c_str());
  });
  std::string base = (std::filesystem::path(out_dir) / id).string();
  std::ofstream csv(base + ".csv"), sum(base + "_summary.csv");
  if (!csv || !sum) throw std::runtime_error("cannot write to '" + out_dir + "'");
  write_csv(csv, s, rows);
  write_summary(sum, s, rows);
  for (const auto& r : rows)
    if (r.status == "error") return 2;
  return 0;
}

int cmd_solve(const std::string& mode, const std::string& scenario, std::uint64_t seed, const std::string& out,
              std::optional<double> lambda) {
  nlohmann::json j = scenario.empty() ? nlohmann::json::object() : read_json(scenario);
  SystemConfig c = draw_workload(config_from_json(j), seed);
  if (lambda) c.lambda_weight = *lambda;
  ChannelSet ch = generate_channels(c, seed);
  Row row;
  Iterate z;
  bool have = false;
  if (mode == "p1" || mode == "p2") {
    SCASettings s;
    s.mode = mode == "p2" ? Mode::p2 : Mode::p1;
    RunReport r = run(c, ch, s);
    row = report_row(c, ch, r, false);
    if (r.ok() && mode == "p2") row.aux = r.final.t_shared;
    z = r.final;
    have = r.ok();
  } else if (mode == "schedule") {
    ScheduleResult r = schedule(c, ch);
    row = selection_row(c, ch, r.selected, SCASettings{});
    std::printf("selected:");
    for (int u : r.selected) std::printf(" %d", u);
    std::printf("\n");
  } else if (mode == "hybrid") {
    RunReport r = run_hybrid(c, ch);
    row = report_row(c, ch, r, true, true);
    if (r.ok()) row.aux = split_fractions(r).mean();
    z = r.final;
    have = r.ok();
  } else if (mode == "netmimo") {
    RunReport r = run_netmimo(c, ch);
    row = report_row(c, ch, r, true);
    if (r.ok()) {
      row.latency = r.final.t1 + r.final.t2;
      row.aux = r.final.t2;
    }
    z = r.final;
    have = r.ok();
  } else {
    throw SpecError("unknown mode '" + mode + "'");
  }
  row.scheme = mode;
  row.seed = seed;
  std::printf("%s seed %llu: %s, energy %s J, latency %s s, %d iterations\n", mode.c_str(),
              static_cast<unsigned long long>(seed), row.status.c_str(), fmt_num(row.energy).c_str(),
              fmt_num(row.latency).c_str(), row.iterations);
  if (have)
    for (int u = 0; u < c.n_users(); ++u) {
      Latency l = latency_components(c, ch, z, u, mode == "hybrid");
      std::printf("  user %d: E_ul %.4e J, latency %.4e s, f %.4f", u, uplink_energy(c, ch, z, u), l.total(), z.f(u));
      if (mode == "hybrid") std::printf(", u %.4f", z.u(u));
      std::printf("\n");
    }
  if (!out.empty()) {
    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot write '" + out + "'");
    ExperimentSpec s;
    s.id = "solve-" + mode;
    s.scenario = j;
    s.seeds = {seed};
    write_csv(os, s, {row});
  }
  return row.status == "error" ? 2 : 0;
}

int cmd_verify(bool quick) {
  using namespace offload::testing;
  int pairs = quick ? 200 : 1000, anchors = quick ? 20 : 100;
  bool all = true;
  auto line = [&](bool ok, const std::string& what) {
    all = all && ok;
    std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", what.c_str());
  };
  for (auto [name, fn] : {std::pair{"latency", &latency_soundness}, std::pair{"energy constraint", &energy_constraint_soundness},
                          std::pair{"hybrid latency", &hybrid_soundness}, std::pair{"rate", &rate_soundness}}) {
    Soundness s = fn(pairs, 11);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s surrogate: min margin %.2e, anchor gap %.2e over %d pairs", name, s.min_margin,
                  s.max_tight, s.samples);
    line(s.min_margin >= -1e-9 && s.max_tight <= 1e-9, buf);
  }
  for (const auto& [k, e] : gradient_suite(anchors, 12)) {
    char buf[120];
    std::snprintf(buf, sizeof buf, "gradient %s: max relative error %.2e", k.c_str(), e);
    line(e <= 1e-5, buf);
  }
  for (auto [k, nc, nt] : {std::tuple{5, 3, 2}, std::tuple{2, 1, 1}, std::tuple{3, 4, 3}}) {
    SystemConfig c = small_config(nc, k, nt, 7);
    ChannelSet ch = generate_channels(c, 7);
    std::mt19937_64 rng(7);
    auto sp = build_subproblem(c, ch, random_iterate(c, rng), ProxWeights{}, SubOptions{});
    DimensionCount d = p3_dimension_counts(k, nc, nt);
    char buf[120];
    std::snprintf(buf, sizeof buf, "dimensions K=%d N_c=%d N_T=%d: n=%d m=%d", k, nc, nt, sp->prob.n,
                  sp->prob.n_constraints());
    line(sp->prob.n == d.n && sp->prob.n_constraints() == d.m, buf);
  }
  SystemConfig c = parse_scenario(R"({"n_cells":2,"users_per_cell":1,"n_tx":1,"n_rx":1})");
  int seeds = quick ? 3 : 6;
  for (int seed = 2; seed < 2 + seeds; ++seed) {
    SystemConfig cs = draw_workload(c, seed);
    ChannelSet ch = generate_channels(cs, seed);
    RunReport r = run(cs, ch, SCASettings{});
    GridResult g = grid_p1(cs, ch, 0.05);
    char buf[160];
    if (!r.ok() || !g.feasible) {
      std::snprintf(buf, sizeof buf, "scalar oracle seed %d: sca %s, oracle %s", seed, r.termination.c_str(),
                    g.feasible ? "feasible" : "infeasible");
      line(r.ok() == g.feasible, buf);
      continue;
    }
    double e = total_energy(cs, ch, r.final);
    double rel = (e - g.energy) / g.energy;
    std::snprintf(buf, sizeof buf, "scalar oracle seed %d: sca %.6e, oracle %.6e, rel %.1e", seed, e, g.energy, rel);
    line(std::abs(rel) <= 1e-3, buf);
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-minimal offloading resource allocation"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment sweep and write CSV tables");
  std::string experiment, seeds = "1..10", out_dir = "results", scenario, grid;
  int jobs = 1, max_outer = 0;
  bool quiet = false;
  run->add_option("--experiment", experiment, "fig3 .. fig10")->required();
  run->add_option("--seeds", seeds, "seed list, e.g. 1..10 or 1,3,5");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--scenario", scenario, "JSON scenario overrides");
  run->add_option("--grid", grid, "comma-separated sweep grid");
  run->add_option("--jobs", jobs, "worker threads");
  run->add_option("--max-outer", max_outer, "outer iteration cap");
  run->add_flag("--quiet", quiet, "no per-point progress");

  auto* solve = app.add_subcommand("solve", "solve one instance");
  std::string mode = "p1", solve_scenario, solve_out;
  std::uint64_t seed = 1;
  std::optional<double> lambda;
  solve->add_option("--mode", mode)->check(CLI::IsMember({"p1", "p2", "schedule", "hybrid", "netmimo"}));
  solve->add_option("--scenario", solve_scenario, "JSON scenario file");
  solve->add_option("--seed", seed);
  solve->add_option("--out", solve_out, "CSV output file");
  solve->add_option("--lambda", lambda, "weight on latency (J/s) for p2 and netmimo");

  auto* verify = app.add_subcommand("verify", "run the property and oracle checks");
  bool quick = false;
  verify->add_flag("--quick", quick, "smaller sample counts");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(experiment, seeds, out_dir, scenario, grid, jobs, max_outer, quiet);
    if (*solve) return cmd_solve(mode, solve_scenario, seed, solve_out, lambda);
    if (*verify) return cmd_verify(quick);
  } catch (const ScenarioError& e) {
    std::fprintf(stderr, "scenario error: %s\n", e.what());
    return 1;
  } catch (const SpecError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  }
  return 0;
}
