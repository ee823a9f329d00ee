#pragma once

#include "offload/linalg.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace offload {

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double db_to_linear(double db) { return std::pow(10.0, -db / 10.0); }

// Users are numbered u = n * K + i (cell n, spectral index i).
struct SystemConfig {
  int n_cells = 3;
  int users_per_cell = 5;
  int n_tx = 2;
  int n_rx = 2;
  double w_ul = 10e6;
  double w_dl = 10e6;
  double n0 = 1e-20;  // W/Hz, i.e. J per received symbol and dimension
  double p_ul = 0.01;
  double p_dl = 0.01;
  std::vector<double> c_ul, c_dl;  // bits/s per cell
  double f_cloud = 1e11;
  std::vector<double> f_cenb;  // cycles/s per cell
  std::vector<double> b_in, b_out, v_cycles, t_max, d_rx;
  double kappa = 1e-26;
  double lambda_weight = 1e4;
  double pathloss_direct_db = 170;
  double pathloss_cross_db = 180;
  double sigma_w2 = 1e-20;

  // Random workload used when b_in/b_out/v_cycles are not given explicitly.
  bool random_workload = true;
  double b_min = 1e5;
  double b_max = 1e6;
  double cycles_per_bit = 330;

  int n_users() const { return n_cells * users_per_cell; }
  int cell_of(int u) const { return u / users_per_cell; }
  int index_of(int u) const { return u % users_per_cell; }
  int user(int n, int i) const { return n * users_per_cell + i; }
};

// Arrays left empty are filled with the defaults (and, for the workload, a
// placeholder mean value until draw_workload is called).
inline void fill_defaults(SystemConfig& c) {
  auto fill = [](std::vector<double>& v, size_t n, double d) {
    if (v.empty()) v.assign(n, d);
    else if (v.size() == 1 && n > 1) v.assign(n, v[0]);
  };
  const size_t nc = c.n_cells > 0 ? c.n_cells : 0;
  const size_t nu = c.n_cells > 0 && c.users_per_cell > 0 ? static_cast<size_t>(c.n_users()) : 0;
  fill(c.c_ul, nc, 100e6);
  fill(c.c_dl, nc, 100e6);
  fill(c.f_cenb, nc, 1e10);
  double bmean = 0.5 * (c.b_min + c.b_max);
  fill(c.b_in, nu, bmean);
  fill(c.b_out, nu, bmean);
  if (c.v_cycles.empty()) {
    c.v_cycles.resize(nu);
    for (size_t u = 0; u < nu; ++u) c.v_cycles[u] = c.cycles_per_bit * c.b_in[u];
  }
  fill(c.v_cycles, nu, c.cycles_per_bit * bmean);
  fill(c.t_max, nu, 0.1);
  fill(c.d_rx, nu, 1e-5);
}

inline void validate(const SystemConfig& c) {
  auto pos = [](double v, const char* name) {
    if (!(v > 0) || !std::isfinite(v)) throw ScenarioError(std::string("invariant violated: ") + name + " must be finite and > 0");
  };
  if (c.n_cells <= 0) throw ScenarioError("invariant violated: n_cells must be > 0");
  if (c.users_per_cell <= 0) throw ScenarioError("invariant violated: users_per_cell must be > 0");
  if (c.n_tx <= 0) throw ScenarioError("invariant violated: n_tx must be > 0");
  if (c.n_rx <= 0) throw ScenarioError("invariant violated: n_rx must be > 0");
  pos(c.w_ul, "w_ul");
  pos(c.w_dl, "w_dl");
  pos(c.n0, "n0");
  pos(c.p_ul, "p_ul");
  pos(c.p_dl, "p_dl");
  pos(c.f_cloud, "f_cloud");
  pos(c.kappa, "kappa");
  pos(c.pathloss_direct_db, "pathloss_direct_db");
  pos(c.pathloss_cross_db, "pathloss_cross_db");
  pos(c.sigma_w2, "sigma_w2");
  if (!(c.lambda_weight >= 0) || !std::isfinite(c.lambda_weight))
    throw ScenarioError("invariant violated: lambda_weight must be finite and >= 0");
  auto arr = [&](const std::vector<double>& v, size_t n, const char* name) {
    if (v.size() != n) throw ScenarioError(std::string("invariant violated: ") + name + " must have " + std::to_string(n) + " entries");
    for (double x : v) pos(x, name);
  };
  arr(c.c_ul, c.n_cells, "c_ul");
  arr(c.c_dl, c.n_cells, "c_dl");
  arr(c.f_cenb, c.n_cells, "f_cenb");
  size_t nu = c.n_users();
  arr(c.b_in, nu, "b_in");
  arr(c.b_out, nu, "b_out");
  arr(c.v_cycles, nu, "v_cycles");
  arr(c.t_max, nu, "t_max");
  arr(c.d_rx, nu, "d_rx");
  if (c.random_workload) {
    pos(c.b_min, "workload.b_min");
    pos(c.cycles_per_bit, "workload.cycles_per_bit");
    if (!(c.b_max >= c.b_min)) throw ScenarioError("invariant violated: workload.b_max must be >= b_min");
  }
}

inline SystemConfig default_config() {
  SystemConfig c;
  fill_defaults(c);
  return c;
}

// Draws B^I, B^O ~ U[b_min, b_max] and V = cycles_per_bit * B^I when the
// workload is random; otherwise returns the config unchanged.
inline SystemConfig draw_workload(SystemConfig c, std::uint64_t seed) {
  if (!c.random_workload) return c;
  std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x57a3u};
  std::mt19937_64 rng(ss);
  std::uniform_real_distribution<double> ub(c.b_min, c.b_max);
  int nu = c.n_users();
  c.b_in.resize(nu);
  c.b_out.resize(nu);
  c.v_cycles.resize(nu);
  for (int u = 0; u < nu; ++u) {
    c.b_in[u] = ub(rng);
    c.b_out[u] = ub(rng);
    c.v_cycles[u] = c.cycles_per_bit * c.b_in[u];
  }
  return c;
}

struct ChannelSet {
  int n_cells = 0, n_users = 0;
  // ul[u][n]: MU u -> ceNB n ; dl[u][m]: ceNB m -> MU u. Both n_rx x n_tx.
  std::vector<std::vector<CMat>> ul, dl;
  std::vector<CMat> g_stacked;  // n_rx x (n_cells * n_tx)

  const CMat& h_direct(const SystemConfig& c, int u) const { return ul[u][c.cell_of(u)]; }
  const CMat& h_cross(int u, int n) const { return ul[u][n]; }
  const CMat& g_direct(const SystemConfig& c, int u) const { return dl[u][c.cell_of(u)]; }
  const CMat& g_cross(int u, int m) const { return dl[u][m]; }
};

inline ChannelSet generate_channels(const SystemConfig& c, std::uint64_t seed) {
  std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xc4a1u};
  std::mt19937_64 rng(ss);
  std::normal_distribution<double> nd(0.0, 1.0);
  ChannelSet ch;
  ch.n_cells = c.n_cells;
  ch.n_users = c.n_users();
  auto draw = [&](double var) {
    CMat m(c.n_rx, c.n_tx);
    double s = std::sqrt(var / 2.0);
    for (int j = 0; j < c.n_tx; ++j)
      for (int i = 0; i < c.n_rx; ++i) {
        double re = nd(rng);
        double im = nd(rng);
        m(i, j) = cd(s * re, s * im);
      }
    return m;
  };
  double vd = db_to_linear(c.pathloss_direct_db), vx = db_to_linear(c.pathloss_cross_db);
  ch.ul.assign(ch.n_users, std::vector<CMat>(c.n_cells));
  ch.dl.assign(ch.n_users, std::vector<CMat>(c.n_cells));
  for (int u = 0; u < ch.n_users; ++u)
    for (int n = 0; n < c.n_cells; ++n) ch.ul[u][n] = draw(n == c.cell_of(u) ? vd : vx);
  for (int u = 0; u < ch.n_users; ++u)
    for (int n = 0; n < c.n_cells; ++n) ch.dl[u][n] = draw(n == c.cell_of(u) ? vd : vx);
  ch.g_stacked.resize(ch.n_users);
  for (int u = 0; u < ch.n_users; ++u) {
    ch.g_stacked[u] = CMat(c.n_rx, c.n_cells * c.n_tx);
    for (int n = 0; n < c.n_cells; ++n) ch.g_stacked[u].middleCols(n * c.n_tx, c.n_tx) = ch.dl[u][n];
  }
  return ch;
}

// ------------------------------------------------------------------ file I/O

namespace detail {

inline const std::set<std::string>& scenario_keys() {
  static const std::set<std::string> k = {
      "n_cells", "users_per_cell", "n_tx", "n_rx", "w_ul_hz", "w_dl_hz", "n0_w_per_hz", "n0_dbm_per_hz",
      "p_ul_j_per_symbol", "p_dl_j_per_symbol", "c_ul_bps", "c_dl_bps", "f_cloud_cps", "f_cenb_cps",
      "b_in_bits", "b_out_bits", "v_cycles", "t_max_s", "d_rx_j_per_symbol", "kappa_j_s2_per_cycle3",
      "lambda_j_per_s", "pathloss_direct_db", "pathloss_cross_db", "snr_direct_db", "sigma_w2_w", "workload"};
  return k;
}

inline std::vector<double> number_or_array(const nlohmann::json& j, const std::string& key) {
  if (j.is_number()) return {j.get<double>()};
  if (j.is_array()) {
    std::vector<double> v;
    for (const auto& e : j) {
      if (!e.is_number()) throw ScenarioError("field '" + key + "': array entries must be numbers");
      v.push_back(e.get<double>());
    }
    return v;
  }
  throw ScenarioError("field '" + key + "': expected number or array of numbers");
}

inline double number(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number()) throw ScenarioError("field '" + key + "': expected a number");
  return j.get<double>();
}

inline int integer(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ScenarioError("field '" + key + "': expected an integer");
  return j.get<int>();
}

}  // namespace detail

inline SystemConfig config_from_json(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw ScenarioError("scenario: top level must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!scenario_keys().count(it.key())) throw ScenarioError("field '" + it.key() + "': unknown key");
  SystemConfig c;
  auto get = [&](const char* k) -> const nlohmann::json* { return j.contains(k) ? &j.at(k) : nullptr; };
  if (auto v = get("n_cells")) c.n_cells = integer(*v, "n_cells");
  if (auto v = get("users_per_cell")) c.users_per_cell = integer(*v, "users_per_cell");
  if (auto v = get("n_tx")) c.n_tx = integer(*v, "n_tx");
  if (auto v = get("n_rx")) c.n_rx = integer(*v, "n_rx");
  if (auto v = get("w_ul_hz")) c.w_ul = number(*v, "w_ul_hz");
  if (auto v = get("w_dl_hz")) c.w_dl = number(*v, "w_dl_hz");
  if (auto v = get("n0_dbm_per_hz")) c.n0 = std::pow(10.0, (number(*v, "n0_dbm_per_hz") - 30.0) / 10.0);
  if (auto v = get("n0_w_per_hz")) c.n0 = number(*v, "n0_w_per_hz");
  if (auto v = get("p_ul_j_per_symbol")) c.p_ul = number(*v, "p_ul_j_per_symbol");
  if (auto v = get("p_dl_j_per_symbol")) c.p_dl = number(*v, "p_dl_j_per_symbol");
  if (auto v = get("c_ul_bps")) c.c_ul = number_or_array(*v, "c_ul_bps");
  if (auto v = get("c_dl_bps")) c.c_dl = number_or_array(*v, "c_dl_bps");
  if (auto v = get("f_cloud_cps")) c.f_cloud = number(*v, "f_cloud_cps");
  if (auto v = get("f_cenb_cps")) c.f_cenb = number_or_array(*v, "f_cenb_cps");
  if (auto v = get("b_in_bits")) c.b_in = number_or_array(*v, "b_in_bits");
  if (auto v = get("b_out_bits")) c.b_out = number_or_array(*v, "b_out_bits");
  if (auto v = get("v_cycles")) c.v_cycles = number_or_array(*v, "v_cycles");
  if (auto v = get("t_max_s")) c.t_max = number_or_array(*v, "t_max_s");
  if (auto v = get("d_rx_j_per_symbol")) c.d_rx = number_or_array(*v, "d_rx_j_per_symbol");
  if (auto v = get("kappa_j_s2_per_cycle3")) c.kappa = number(*v, "kappa_j_s2_per_cycle3");
  if (auto v = get("lambda_j_per_s")) c.lambda_weight = number(*v, "lambda_j_per_s");
  if (auto v = get("pathloss_direct_db")) c.pathloss_direct_db = number(*v, "pathloss_direct_db");
  if (auto v = get("pathloss_cross_db")) c.pathloss_cross_db = number(*v, "pathloss_cross_db");
  // noise set from a target mean direct-link SNR at the uplink power budget
  if (auto v = get("snr_direct_db"))
    c.n0 = c.p_ul * std::pow(10.0, -c.pathloss_direct_db / 10.0) / std::pow(10.0, number(*v, "snr_direct_db") / 10.0);
  bool sigma_given = false;
  if (auto v = get("sigma_w2_w")) {
    c.sigma_w2 = number(*v, "sigma_w2_w");
    sigma_given = true;
  }
  if (!sigma_given) c.sigma_w2 = c.n0;
  if (auto w = get("workload")) {
    if (!w->is_object()) throw ScenarioError("field 'workload': expected an object");
    for (auto it = w->begin(); it != w->end(); ++it) {
      const std::string& k = it.key();
      if (k == "b_min_bits") c.b_min = number(*it, "workload.b_min_bits");
      else if (k == "b_max_bits") c.b_max = number(*it, "workload.b_max_bits");
      else if (k == "cycles_per_bit") c.cycles_per_bit = number(*it, "workload.cycles_per_bit");
      else throw ScenarioError("field 'workload." + k + "': unknown key");
    }
  }
  c.random_workload = !(j.contains("b_in_bits") || j.contains("b_out_bits"));
  if (c.random_workload && j.contains("v_cycles")) c.random_workload = false;
  fill_defaults(c);
  validate(c);
  return c;
}

inline nlohmann::json config_to_json(const SystemConfig& c) {
  nlohmann::json j;
  j["n_cells"] = c.n_cells;
  j["users_per_cell"] = c.users_per_cell;
  j["n_tx"] = c.n_tx;
  j["n_rx"] = c.n_rx;
  j["w_ul_hz"] = c.w_ul;
  j["w_dl_hz"] = c.w_dl;
  j["n0_w_per_hz"] = c.n0;
  j["p_ul_j_per_symbol"] = c.p_ul;
  j["p_dl_j_per_symbol"] = c.p_dl;
  j["c_ul_bps"] = c.c_ul;
  j["c_dl_bps"] = c.c_dl;
  j["f_cloud_cps"] = c.f_cloud;
  j["f_cenb_cps"] = c.f_cenb;
  if (!c.random_workload) {
    j["b_in_bits"] = c.b_in;
    j["b_out_bits"] = c.b_out;
    j["v_cycles"] = c.v_cycles;
  }
  j["t_max_s"] = c.t_max;
  j["d_rx_j_per_symbol"] = c.d_rx;
  j["kappa_j_s2_per_cycle3"] = c.kappa;
  j["lambda_j_per_s"] = c.lambda_weight;
  j["pathloss_direct_db"] = c.pathloss_direct_db;
  j["pathloss_cross_db"] = c.pathloss_cross_db;
  j["sigma_w2_w"] = c.sigma_w2;
  j["workload"] = {{"b_min_bits", c.b_min}, {"b_max_bits", c.b_max}, {"cycles_per_bit", c.cycles_per_bit}};
  return j;
}

inline SystemConfig parse_scenario(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    size_t line = 1, col = 1;
    for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << "parse error at line " << line << ", column " << col << ": " << e.what();
    throw ScenarioError(os.str());
  }
  if (j.is_null()) j = nlohmann::json::object();
  return config_from_json(j);
}

inline SystemConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  bool blank = text.find_first_not_of(" \t\r\n") == std::string::npos;
  return parse_scenario(blank ? "{}" : text);
}

inline void save_scenario(const SystemConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write scenario file '" + path + "'");
  out << config_to_json(c).dump(2) << "\n";
}

}  // namespace offload
