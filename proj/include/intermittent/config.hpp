#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "intermittent/error.hpp"

namespace intermittent {

inline const std::vector<std::string>& all_stages() {
  static const std::vector<std::string> s{"ladder", "tails",  "density", "operators",
                                          "mixing", "tower", "hip",     "baumkatz"};
  return s;
}

/// Every experiment parameter, grouped by INI section. Each field has a default.
struct ExperimentConfig {
  struct Map {
    double gamma = 0.25;
    std::string rho = "const";
    double rho_a = 1.0;
    double rho_b = 1.0;
    bool check_mode = false;
    bool operator==(const Map&) const = default;
  } map;
  struct Run {
    std::vector<std::string> stages = all_stages();
    std::uint64_t seed = 1;
    int threads = 0;
    std::string out = "run";
    bool operator==(const Run&) const = default;
  } run;
  struct Ladder {
    std::size_t N = 10000;
    bool operator==(const Ladder&) const = default;
  } ladder;
  struct Tails {
    std::size_t n_lo = 100, n_hi = 10000, points = 25, samples = 1000000;
    bool operator==(const Tails&) const = default;
  } tails;
  struct Density {
    std::size_t depth = 10000, y_cells = 256, max_R = 10000, empirical_iter = 10000000, burn_in = 10000;
    double x0 = 0.3;
    double l1_from = 0.05;
    std::size_t kac_N = 10000, h_from = 10, h_to = 100, fixed_point_depth = 50;
    std::size_t smooth_nodes = 40, smooth_max_R = 2000, center_depth = 64;
    bool operator==(const Density&) const = default;
  } density;
  struct Operators {
    std::size_t depth = 10000, y_cells = 256, q = 1;
    std::size_t bv_lo = 8, bv_hi = 512, bv_points = 12, sum_N = 10000;
    std::size_t renewal_N = 256, renewal_lo = 16, renewal_points = 12;
    std::size_t split_depth = 255, split_y_cells = 256, split_n = 16;
    bool operator==(const Operators&) const = default;
  } operators;
  struct Mixing {
    std::size_t depth = 10000, y_cells = 256, q = 1, n_lo = 8, n_hi = 256, points = 11;
    bool operator==(const Mixing&) const = default;
  } mixing;
  struct Tower {
    std::size_t samples = 1000000;
    double xi = 0.5;
    std::string reading = "length";
    std::size_t ladder_N = 1000000, n_lo = 16, n_hi = 1024, points = 12, cap = 10000000, exact_D = 16384;
    bool operator==(const Tower&) const = default;
  } tower;
  struct Hip {
    std::string observable = "identity";
    double alpha = 1.0, interval_lo = 0.6, interval_hi = 0.8;
    std::vector<std::size_t> n_list{4096, 16384, 65536};
    std::size_t paths = 2000;
    double eta = 0.2;
    std::size_t ref_grid = 16384, ref_count = 20000;
    std::size_t sigma_depth = 2000, sigma_q = 64, sigma_y_cells = 256, k_max = 2048;
    std::size_t mc_block = 32768, mc_blocks = 2000;
    bool exact_holder = false;
    bool operator==(const Hip&) const = default;
  } hip;
  struct BaumKatz {
    std::string observable = "identity";
    double alpha = 1.0, interval_lo = 0.6, interval_hi = 0.8;
    double a = 1.0, x = 0.5, p = 3.5, order = 1.5;
    std::size_t N = 65536, mc = 2000, windows = 4;
    bool operator==(const BaumKatz&) const = default;
  } baumkatz;
  struct Tolerances {
    double ladder_ratio = 0.02;
    std::size_t ladder_n = 10000;
    double tail_slope = 0.1, density_l1 = 0.05, kac = 0.02, h_ratio = 0.15;
    double bv_slope = 0.3, lambda_sum = 1e-3, renewal_slope = 0.4, split = 1e-6;
    std::size_t split_n = 8;
    double alpha_slope = 0.5, h_slope = 0.3, T_slope = 0.4, sigma_rel = 0.1, bk_tail = 0.05;
    bool operator==(const Tolerances&) const = default;
  } tolerances;

  bool operator==(const ExperimentConfig&) const = default;

  bool has_stage(const std::string& s) const {
    for (const auto& x : run.stages)
      if (x == s) return true;
    return false;
  }
};

/// Calls f(section, key, field) for every field, in serialization order.
template <typename Config, typename F>
void visit_fields(Config& c, F&& f) {
  f("map", "gamma", c.map.gamma);
  f("map", "rho", c.map.rho);
  f("map", "rho_a", c.map.rho_a);
  f("map", "rho_b", c.map.rho_b);
  f("map", "check_mode", c.map.check_mode);
  f("run", "stages", c.run.stages);
  f("run", "seed", c.run.seed);
  f("run", "threads", c.run.threads);
  f("run", "out", c.run.out);
  f("ladder", "N", c.ladder.N);
  f("tails", "n_lo", c.tails.n_lo);
  f("tails", "n_hi", c.tails.n_hi);
  f("tails", "points", c.tails.points);
  f("tails", "samples", c.tails.samples);
  auto& d = c.density;
  f("density", "depth", d.depth);
  f("density", "y_cells", d.y_cells);
  f("density", "max_R", d.max_R);
  f("density", "empirical_iter", d.empirical_iter);
  f("density", "burn_in", d.burn_in);
  f("density", "x0", d.x0);
  f("density", "l1_from", d.l1_from);
  f("density", "kac_N", d.kac_N);
  f("density", "h_from", d.h_from);
  f("density", "h_to", d.h_to);
  f("density", "fixed_point_depth", d.fixed_point_depth);
  f("density", "smooth_nodes", d.smooth_nodes);
  f("density", "smooth_max_R", d.smooth_max_R);
  f("density", "center_depth", d.center_depth);
  auto& o = c.operators;
  f("operators", "depth", o.depth);
  f("operators", "y_cells", o.y_cells);
  f("operators", "q", o.q);
  f("operators", "bv_lo", o.bv_lo);
  f("operators", "bv_hi", o.bv_hi);
  f("operators", "bv_points", o.bv_points);
  f("operators", "sum_N", o.sum_N);
  f("operators", "renewal_N", o.renewal_N);
  f("operators", "renewal_lo", o.renewal_lo);
  f("operators", "renewal_points", o.renewal_points);
  f("operators", "split_depth", o.split_depth);
  f("operators", "split_y_cells", o.split_y_cells);
  f("operators", "split_n", o.split_n);
  auto& m = c.mixing;
  f("mixing", "depth", m.depth);
  f("mixing", "y_cells", m.y_cells);
  f("mixing", "q", m.q);
  f("mixing", "n_lo", m.n_lo);
  f("mixing", "n_hi", m.n_hi);
  f("mixing", "points", m.points);
  auto& t = c.tower;
  f("tower", "samples", t.samples);
  f("tower", "xi", t.xi);
  f("tower", "reading", t.reading);
  f("tower", "ladder_N", t.ladder_N);
  f("tower", "n_lo", t.n_lo);
  f("tower", "n_hi", t.n_hi);
  f("tower", "points", t.points);
  f("tower", "cap", t.cap);
  f("tower", "exact_D", t.exact_D);
  auto& h = c.hip;
  f("hip", "observable", h.observable);
  f("hip", "alpha", h.alpha);
  f("hip", "interval_lo", h.interval_lo);
  f("hip", "interval_hi", h.interval_hi);
  f("hip", "n_list", h.n_list);
  f("hip", "paths", h.paths);
  f("hip", "eta", h.eta);
  f("hip", "ref_grid", h.ref_grid);
  f("hip", "ref_count", h.ref_count);
  f("hip", "sigma_depth", h.sigma_depth);
  f("hip", "sigma_q", h.sigma_q);
  f("hip", "sigma_y_cells", h.sigma_y_cells);
  f("hip", "k_max", h.k_max);
  f("hip", "mc_block", h.mc_block);
  f("hip", "mc_blocks", h.mc_blocks);
  f("hip", "exact_holder", h.exact_holder);
  auto& b = c.baumkatz;
  f("baumkatz", "observable", b.observable);
  f("baumkatz", "alpha", b.alpha);
  f("baumkatz", "interval_lo", b.interval_lo);
  f("baumkatz", "interval_hi", b.interval_hi);
  f("baumkatz", "a", b.a);
  f("baumkatz", "x", b.x);
  f("baumkatz", "p", b.p);
  f("baumkatz", "order", b.order);
  f("baumkatz", "N", b.N);
  f("baumkatz", "mc", b.mc);
  f("baumkatz", "windows", b.windows);
  auto& tol = c.tolerances;
  f("tolerances", "ladder_ratio", tol.ladder_ratio);
  f("tolerances", "ladder_n", tol.ladder_n);
  f("tolerances", "tail_slope", tol.tail_slope);
  f("tolerances", "density_l1", tol.density_l1);
  f("tolerances", "kac", tol.kac);
  f("tolerances", "h_ratio", tol.h_ratio);
  f("tolerances", "bv_slope", tol.bv_slope);
  f("tolerances", "lambda_sum", tol.lambda_sum);
  f("tolerances", "renewal_slope", tol.renewal_slope);
  f("tolerances", "split", tol.split);
  f("tolerances", "split_n", tol.split_n);
  f("tolerances", "alpha_slope", tol.alpha_slope);
  f("tolerances", "h_slope", tol.h_slope);
  f("tolerances", "T_slope", tol.T_slope);
  f("tolerances", "sigma_rel", tol.sigma_rel);
  f("tolerances", "bk_tail", tol.bk_tail);
}

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& where, const std::string& text) {
  const std::string s = trim(text);
  T v{};
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t pos = 0;
      v = std::stod(s, &pos);
      if (pos != s.size()) throw InvalidInput("");
    } catch (const std::exception&) {
      throw InvalidInput("config " + where + ": not a number: '" + s + "'");
    }
  } else {
    // accept integer-valued scientific notation such as 1e6
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      double d = 0;
      try {
        std::size_t pos = 0;
        d = std::stod(s, &pos);
        if (pos != s.size()) throw InvalidInput("");
      } catch (const std::exception&) {
        throw InvalidInput("config " + where + ": not an integer: '" + s + "'");
      }
      if (d != static_cast<double>(static_cast<T>(d)) || (std::is_unsigned_v<T> && d < 0))
        throw InvalidInput("config " + where + ": not a valid integer: '" + s + "'");
      v = static_cast<T>(d);
    }
  }
  return v;
}

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seed is read through the size_t path");

struct FieldIO {
  static std::string format(double v) { return format_double(v); }
  static std::string format(bool v) { return v ? "true" : "false"; }
  static std::string format(const std::string& v) { return v; }
  static std::string format(int v) { return std::to_string(v); }
  static std::string format(std::size_t v) { return std::to_string(v); }
  template <typename T>
  static std::string format(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format(v[i]);
    return s;
  }

  static void parse(const std::string& w, const std::string& s, double& v) { v = parse_number<double>(w, s); }
  static void parse(const std::string& w, const std::string& s, int& v) { v = parse_number<int>(w, s); }
  static void parse(const std::string& w, const std::string& s, std::size_t& v) { v = parse_number<std::size_t>(w, s); }
  static void parse(const std::string& w, const std::string& s, std::string& v) {
    (void)w;
    v = trim(s);
  }
  static void parse(const std::string& w, const std::string& s, bool& v) {
    const std::string t = trim(s);
    if (t == "true" || t == "1" || t == "yes") v = true;
    else if (t == "false" || t == "0" || t == "no") v = false;
    else throw InvalidInput("config " + w + ": not a boolean: '" + t + "'");
  }
  static void parse(const std::string& w, const std::string& s, std::vector<std::string>& v) {
    (void)w;
    v = split_list(s);
  }
  static void parse(const std::string& w, const std::string& s, std::vector<std::size_t>& v) {
    v.clear();
    for (const auto& item : split_list(s)) v.push_back(parse_number<std::size_t>(w, item));
  }
};

}  // namespace detail

/// Checks ranges and names that the stages rely on.
inline void validate(const ExperimentConfig& c) {
  require(c.map.gamma > 0, "config map.gamma must be positive");
  require(c.map.check_mode || c.map.gamma < 1, "config map.gamma must be < 1 unless map.check_mode = true");
  require(c.map.rho == "const" || c.map.rho == "invlog" || c.map.rho == "logpow",
          "config map.rho must be one of const, invlog, logpow");
  for (const auto& s : c.run.stages) {
    bool known = false;
    for (const auto& k : all_stages()) known |= k == s;
    require(known, "config run.stages: unknown stage '" + s + "'");
  }
  require(c.ladder.N >= 2, "config ladder.N must be at least 2");
  require(c.tower.reading == "length" || c.tower.reading == "height", "config tower.reading must be length or height");
  for (const auto* o : {&c.hip.observable, &c.baumkatz.observable})
    require(*o == "identity" || *o == "power" || *o == "indicator" || *o == "coboundary",
            "config observable must be identity, power, indicator or coboundary");
  require(!c.hip.n_list.empty(), "config hip.n_list must not be empty");
  require(c.hip.eta > 0 && c.hip.eta < 0.5, "config hip.eta must lie in (0, 1/2)");
}

/// Parses INI text. Unknown sections or keys are rejected.
inline ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  std::set<std::string> known;
  visit_fields(c, [&](const char* sec, const char* key, auto& field) {
    const std::string path = std::string(sec) + "." + key;
    known.insert(path);
    if (const auto s = tree.get_child_optional(pt::ptree::path_type(path, '.')))
      detail::FieldIO::parse(path, s->data(), field);
  });
  for (const auto& [sec, body] : tree) {
    if (body.empty() && !body.data().empty()) throw InvalidInput("config: key '" + sec + "' outside a section");
    for (const auto& [key, val] : body) {
      (void)val;
      if (!known.count(sec + "." + key)) throw InvalidInput("config: unknown key '" + sec + "." + key + "'");
    }
    bool sec_known = false;
    for (const auto& k : known) sec_known |= k.rfind(sec + ".", 0) == 0;
    if (!sec_known) throw InvalidInput("config: unknown section '" + sec + "'");
  }
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// INI text with every field, in a fixed order.
inline std::string serialize_config(const ExperimentConfig& c) {
  std::string out, current;
  visit_fields(c, [&](const char* sec, const char* key, const auto& field) {
    if (current != sec) {
      out += (current.empty() ? "" : "\n") + std::string("[") + sec + "]\n";
      current = sec;
    }
    out += std::string(key) + " = " + detail::FieldIO::format(field) + "\n";
  });
  return out;
}

}  // namespace intermittent
