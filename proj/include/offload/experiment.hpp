#pragma once

// Experiment runner: parameter sweeps over seeds, baselines and CSV output.

#include "offload/hybrid.hpp"
#include "offload/netmimo.hpp"
#include "offload/oracle.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <thread>

namespace offload {

struct SpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ExperimentSpec {
  std::string id;
  nlohmann::json scenario = nlohmann::json::object();  // overrides on top of the defaults
  std::vector<std::uint64_t> seeds;
  std::string sweep;               // t_max_s | c_bps | w_ratio | lambda_j_per_s
  std::vector<double> grid;
  std::vector<double> levels;      // backhaul levels (c_bps); empty: single level
  std::vector<std::string> schemes;
  int max_outer = 500;
};

struct Row {
  double sweep = 0;
  std::string scheme;
  std::uint64_t seed = 0;
  double energy = kInf, latency = kInf;
  int iterations = 0;
  std::string status;
  double aux = 0;
};

inline const std::vector<std::string>& known_schemes() {
  static const std::vector<std::string> k = {"joint",    "equal-backhaul", "equal-cloud", "equal-both", "trace",
                                             "schedule", "exhaustive",     "local",       "hybrid",     "cloud",
                                             "edge",     "coop",           "noncoop"};
  return k;
}

inline void validate_spec(const ExperimentSpec& s) {
  if (s.seeds.empty()) throw SpecError("spec: seed list is empty");
  if (s.grid.empty()) throw SpecError("spec: sweep grid is empty");
  for (size_t i = 1; i < s.grid.size(); ++i)
    if (!(s.grid[i] > s.grid[i - 1])) throw SpecError("spec: sweep grid must be strictly increasing");
  for (size_t i = 1; i < s.levels.size(); ++i)
    if (!(s.levels[i] > s.levels[i - 1])) throw SpecError("spec: backhaul levels must be strictly increasing");
  static const std::set<std::string> sweeps = {"t_max_s", "c_bps", "w_ratio", "lambda_j_per_s"};
  if (!sweeps.count(s.sweep)) throw SpecError("spec: unknown sweep variable '" + s.sweep + "'");
  if (s.schemes.empty()) throw SpecError("spec: no schemes");
  for (const auto& k : s.schemes)
    if (std::find(known_schemes().begin(), known_schemes().end(), k) == known_schemes().end())
      throw SpecError("spec: unknown scheme '" + k + "'");
  if (s.max_outer < 1) throw SpecError("spec: max_outer must be >= 1");
}

// Built-in sweeps fig3 .. fig10. Scheduling, hybrid (fig8) and network-MIMO
// runs use fixed per-user workloads; the others draw them per seed.
inline ExperimentSpec experiment_spec(const std::string& id) {
  using nlohmann::json;
  ExperimentSpec s;
  s.id = id;
  for (std::uint64_t k = 1; k <= 10; ++k) s.seeds.push_back(k);
  if (id == "fig3") {
    s.scenario = {{"w_ul_hz", 1e8}, {"w_dl_hz", 1e8}};
    s.sweep = "t_max_s";
    s.grid = {0.12};
    s.schemes = {"trace"};
  } else if (id == "fig4") {
    s.scenario = {{"w_ul_hz", 1e8}, {"w_dl_hz", 1e8}};
    s.sweep = "t_max_s";
    s.grid = {0.12, 0.16, 0.2};
    s.schemes = {"joint", "equal-backhaul", "equal-cloud", "equal-both"};
  } else if (id == "fig5") {
    s.scenario = {{"n_cells", 2}, {"users_per_cell", 2}, {"w_dl_hz", 1e7}, {"t_max_s", 0.09}};
    s.sweep = "w_ratio";
    s.grid = {0.5, 1, 2, 4};
    s.schemes = {"joint", "equal-backhaul", "equal-cloud", "equal-both"};
  } else if (id == "fig6" || id == "fig7") {
    s.scenario = {{"n_cells", 2},         {"users_per_cell", 2}, {"b_in_bits", 1e6},
                  {"b_out_bits", 1e6},    {"v_cycles", 1e9},     {"snr_direct_db", 20}};
    s.sweep = "t_max_s";
    s.grid = {0.05, 0.07, 0.09, 0.12, 0.15};
    if (id == "fig6") {
      s.levels = {1e8, 1e9};
      s.schemes = {"schedule", "exhaustive"};
    } else {
      s.scenario["c_ul_bps"] = 1e8;
      s.scenario["c_dl_bps"] = 1e8;
      s.schemes = {"schedule", "exhaustive", "local"};
    }
  } else if (id == "fig8") {
    s.scenario = {{"n_cells", 2},
                  {"users_per_cell", 2},
                  {"t_max_s", 0.9},
                  {"f_cenb_cps", 1e10},
                  {"b_in_bits", {1e6, 7e5, 5e5, 1e5}},
                  {"b_out_bits", {1e6, 7e5, 5e5, 1e5}},
                  {"v_cycles", {1e9, 7e8, 5e8, 1e8}}};
    s.sweep = "c_bps";
    s.grid = {1e7, 3e7, 1e8, 3e8, 1e9};
    s.schemes = {"hybrid", "cloud", "edge"};
  } else if (id == "fig9") {
    s.scenario = {{"n_cells", 2}, {"users_per_cell", 2}, {"t_max_s", 0.1}, {"f_cenb_cps", 1e10}};
    s.sweep = "c_bps";
    s.grid = {1e7, 3e7, 1e8, 3e8, 1e9};
    s.schemes = {"hybrid", "cloud", "edge"};
  } else if (id == "fig10") {
    s.scenario = {{"n_cells", 2},
                  {"users_per_cell", 2},
                  {"b_in_bits", {1e6, 1e5, 1e6, 1e5}},
                  {"b_out_bits", {1e6, 1e5, 1e6, 1e5}},
                  {"v_cycles", {1e9, 1e8, 1e9, 1e8}}};
    s.sweep = "lambda_j_per_s";
    s.grid = {1e4, 1e5, 1e6};
    s.levels = {1e7, 1e8, 1e10};
    s.schemes = {"coop", "noncoop"};
  } else {
    throw SpecError("unknown experiment '" + id + "'");
  }
  return s;
}

inline nlohmann::json spec_to_json(const ExperimentSpec& s) {
  return {{"id", s.id},         {"scenario", s.scenario}, {"seeds", s.seeds},     {"sweep", s.sweep},
          {"grid", s.grid},     {"levels", s.levels},     {"schemes", s.schemes}, {"max_outer", s.max_outer}};
}

// "1..10", "3", "1,4,7" or a mix such as "1..3,8".
inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string part;
  auto num = [&](const std::string& t) {
    size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(t, &pos);
    } catch (const std::exception&) {
      throw SpecError("bad seed list '" + text + "'");
    }
    if (pos != t.size()) throw SpecError("bad seed list '" + text + "'");
    return static_cast<std::uint64_t>(v);
  };
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(num(part));
      continue;
    }
    std::uint64_t a = num(part.substr(0, dots)), b = num(part.substr(dots + 2));
    if (b < a) throw SpecError("bad seed range '" + part + "'");
    for (std::uint64_t k = a; k <= b; ++k) out.push_back(k);
  }
  return out;
}

// Scenario for one sweep point and backhaul level.
inline SystemConfig point_config(const ExperimentSpec& s, double x, std::optional<double> level) {
  nlohmann::json j = s.scenario;
  if (level) j["c_ul_bps"] = j["c_dl_bps"] = *level;
  if (s.sweep == "t_max_s") j["t_max_s"] = x;
  else if (s.sweep == "c_bps") j["c_ul_bps"] = j["c_dl_bps"] = x;
  else if (s.sweep == "lambda_j_per_s") j["lambda_j_per_s"] = x;
  else if (s.sweep == "w_ratio") j["w_ul_hz"] = x * (j.contains("w_dl_hz") ? j["w_dl_hz"].get<double>() : SystemConfig{}.w_dl);
  return config_from_json(j);
}

inline double max_latency(const SystemConfig& c, const ChannelSet& ch, const Iterate& z, bool hybrid = false) {
  double t = 0;
  for (int u = 0; u < c.n_users(); ++u)
    if (z.is_active(u)) t = std::max(t, latency_components(c, ch, z, u, hybrid).total());
  return t;
}

inline Row report_row(const SystemConfig& c, const ChannelSet& ch, const RunReport& r, bool uplink_only,
                      bool hybrid = false) {
  Row row;
  row.status = r.termination;
  if (!r.ok()) return row;
  row.energy = total_energy(c, ch, r.final, uplink_only);
  row.latency = max_latency(c, ch, r.final, hybrid);
  row.iterations = r.iterations();
  return row;
}

// Restricted allocations: equal-backhaul pins c = 1/K, equal-cloud pins f = 1/(N_c K).
inline RunReport baseline_allocate(const std::string& kind, const SystemConfig& c, const ChannelSet& ch,
                                   SCASettings s = {}) {
  if (kind == "equal-backhaul") s.pin_c = true;
  else if (kind == "equal-cloud") s.pin_f = true;
  else if (kind == "equal-both") s.pin_c = s.pin_f = true;
  else throw std::invalid_argument("baseline_allocate: unknown kind '" + kind + "'");
  return run(c, ch, s);
}

inline double local_total(const SystemConfig& c, const std::vector<int>& offloading) {
  double e = 0;
  std::vector<char> off = subset_mask(c.n_users(), offloading);
  for (int u = 0; u < c.n_users(); ++u)
    if (!off[u]) e += local_energy(c, u);
  return e;
}

// Local energy of the non-selected users plus the uplink energy of the p1 problem on the selected set.
inline Row selection_row(const SystemConfig& c, const ChannelSet& ch, const std::vector<int>& sel,
                         const SCASettings& base) {
  Row row;
  row.aux = static_cast<double>(sel.size());
  row.status = "ok";
  row.energy = local_total(c, sel);
  row.latency = 0;
  if (sel.empty()) return row;
  SCASettings s = base;
  s.uplink_only = true;
  s.active = subset_mask(c.n_users(), sel);
  RunReport r = run(c, ch, s);
  if (!r.ok()) {
    row.status = "infeasible-selection";
    row.energy = kInf;
    return row;
  }
  row.energy += total_energy(c, ch, r.final, true);
  row.latency = max_latency(c, ch, r.final);
  row.iterations = r.iterations();
  return row;
}

inline std::vector<Row> run_point(const ExperimentSpec& s, double x, std::optional<double> level,
                                  std::uint64_t seed) {
  SystemConfig c = draw_workload(point_config(s, x, level), seed);
  ChannelSet ch = generate_channels(c, seed);
  SCASettings sca;
  sca.max_outer = s.max_outer;
  std::vector<Row> rows;
  std::optional<RunReport> coop;
  auto push = [&](Row r, const std::string& scheme) {
    r.sweep = x;
    r.seed = seed;
    r.scheme = scheme;
    if (level) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s@%g", scheme.c_str(), *level);
      r.scheme = buf;
    }
    rows.push_back(std::move(r));
  };
  for (const auto& k : s.schemes) {
    if (k == "joint") {
      push(report_row(c, ch, run(c, ch, sca), false), k);
    } else if (k == "trace") {
      RunReport r = run(c, ch, sca);
      for (size_t v = 0; v < r.trace.size(); ++v) {
        Row t;
        t.energy = r.trace[v];
        t.latency = r.residual.size() > v ? r.residual[v] : 0;
        t.iterations = static_cast<int>(v);
        t.status = "iterate";
        t.aux = static_cast<double>(v);
        push(t, k);
      }
      push(report_row(c, ch, r, false), "joint");
    } else if (k == "equal-backhaul" || k == "equal-cloud" || k == "equal-both") {
      push(report_row(c, ch, baseline_allocate(k, c, ch, sca), false), k);
    } else if (k == "schedule") {
      ScheduleResult r = schedule(c, ch);
      push(selection_row(c, ch, r.selected, sca), k);
    } else if (k == "exhaustive") {
      ExhaustiveResult r = exhaustive_schedule(c, ch, sca);
      push(selection_row(c, ch, r.best, sca), k);
    } else if (k == "local") {
      Row r;
      r.energy = local_total(c, {});
      r.latency = c.t_max.empty() ? 0 : *std::max_element(c.t_max.begin(), c.t_max.end());
      r.status = "ok";
      push(r, k);
    } else if (k == "hybrid" || k == "cloud" || k == "edge") {
      HybridSettings h;
      h.max_outer = s.max_outer;
      if (k == "cloud") h.pin_u = 1.0;
      if (k == "edge") h.pin_u = 0.0;
      RunReport r = run_hybrid(c, ch, h);
      Row row = report_row(c, ch, r, true, true);
      if (r.ok()) row.aux = split_fractions(r).mean();
      push(row, k);
    } else if (k == "coop" || k == "noncoop") {
      if (!coop) {
        NetMimoSettings ns;
        ns.max_outer = s.max_outer;
        coop = run_netmimo(c, ch, ns);
      }
      Row row = report_row(c, ch, *coop, true);
      if (coop->ok()) {
        row.latency = coop->final.t1 + coop->final.t2;
        row.aux = coop->final.t2;
      }
      if (k == "coop") {
        push(row, k);
        continue;
      }
      // non-coop: p1 uplink energy at the deadline T1 + T2 reached by the coop run
      Row nc;
      nc.status = "infeasible-start";
      if (coop->ok()) {
        SystemConfig c2 = c;
        std::fill(c2.t_max.begin(), c2.t_max.end(), row.latency);
        SCASettings p1 = sca;
        p1.uplink_only = true;
        nc = report_row(c2, ch, run(c2, ch, p1), true);
        nc.latency = row.latency;
      }
      push(nc, k);
    }
  }
  return rows;
}

// Sweep points x levels x seeds, dispatched to `jobs` workers; output order is
// (sweep, level, seed, scheme) regardless of the worker count.
inline std::vector<Row> run_experiment(const ExperimentSpec& s, int jobs = 1,
                                       const std::function<void(const std::vector<Row>&)>& on_point = {}) {
  validate_spec(s);
  struct Task {
    double x;
    std::optional<double> level;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  std::vector<std::optional<double>> lv;
  if (s.levels.empty()) lv.push_back(std::nullopt);
  for (double l : s.levels) lv.push_back(l);
  for (double x : s.grid)
    for (const auto& l : lv)
      for (std::uint64_t seed : s.seeds) tasks.push_back({x, l, seed});
  std::vector<std::vector<Row>> out(tasks.size());
  std::vector<std::string> errors(tasks.size());
  std::atomic<size_t> next{0};
  std::mutex mu;
  auto worker = [&] {
    for (size_t i = next++; i < tasks.size(); i = next++) {
      try {
        out[i] = run_point(s, tasks[i].x, tasks[i].level, tasks[i].seed);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        Row r;
        r.sweep = tasks[i].x;
        r.seed = tasks[i].seed;
        r.scheme = "all";
        r.status = "error";
        out[i] = {r};
      }
      if (on_point) {
        std::lock_guard<std::mutex> g(mu);
        on_point(out[i]);
      }
    }
  };
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::vector<Row> rows;
  for (auto& v : out) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

// ---------------------------------------------------------------------- CSV

inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

inline void write_csv(std::ostream& os, const ExperimentSpec& s, const std::vector<Row>& rows) {
  os << "# offload-csv v1\n# spec " << spec_to_json(s).dump() << "\n";
  os << "sweep,scheme,seed,energy_J,latency_s,iterations,status,aux\n";
  for (const auto& r : rows)
    os << fmt_num(r.sweep) << ',' << r.scheme << ',' << r.seed << ',' << fmt_num(r.energy) << ','
       << fmt_num(r.latency) << ',' << r.iterations << ',' << r.status << ',' << fmt_num(r.aux) << '\n';
}

struct SummaryRow {
  double sweep;
  std::string scheme;
  int n_ok = 0, n = 0;
  double energy = 0, latency = 0, aux = 0;  // means over finite-energy seeds
};

// Seed averages per (sweep, scheme), in first-appearance order. Per-iteration
// "iterate" rows are left out.
inline std::vector<SummaryRow> summarize(const std::vector<Row>& rows) {
  std::vector<SummaryRow> out;
  std::map<std::pair<double, std::string>, size_t> at;
  for (const auto& r : rows) {
    if (r.status == "iterate") continue;
    auto key = std::make_pair(r.sweep, r.scheme);
    auto it = at.find(key);
    if (it == at.end()) {
      it = at.emplace(key, out.size()).first;
      out.push_back({r.sweep, r.scheme});
    }
    SummaryRow& s = out[it->second];
    ++s.n;
    if (std::isfinite(r.energy)) {
      ++s.n_ok;
      s.energy += r.energy;
      s.latency += r.latency;
      s.aux += r.aux;
    }
  }
  for (auto& s : out)
    if (s.n_ok) {
      s.energy /= s.n_ok;
      s.latency /= s.n_ok;
      s.aux /= s.n_ok;
    } else {
      s.energy = s.latency = s.aux = kInf;
    }
  return out;
}

inline void write_summary(std::ostream& os, const ExperimentSpec& s, const std::vector<Row>& rows) {
  os << "# offload-csv v1 summary\n# spec " << spec_to_json(s).dump() << "\n";
  os << "sweep,scheme,n_ok,n,energy_J,latency_s,aux\n";
  for (const auto& r : summarize(rows))
    os << fmt_num(r.sweep) << ',' << r.scheme << ',' << r.n_ok << ',' << r.n << ',' << fmt_num(r.energy) << ','
       << fmt_num(r.latency) << ',' << fmt_num(r.aux) << '\n';
}

}  // namespace offload
