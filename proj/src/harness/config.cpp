#include <toml.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "karlin/error.hpp"
#include "karlin/harness.hpp"

namespace karlin::harness {

namespace {

const std::vector<std::pair<ExperimentKind, std::string>>& kind_names() {
  static const std::vector<std::pair<ExperimentKind, std::string>> names{
      {ExperimentKind::mc_variance, "mc_variance"}, {ExperimentKind::mc_fdd, "mc_fdd"},
      {ExperimentKind::techest, "techest"},         {ExperimentKind::coupling, "coupling"},
      {ExperimentKind::kingman, "kingman"},         {ExperimentKind::crp_fclt, "crp_fclt"},
      {ExperimentKind::localclt, "localclt"},       {ExperimentKind::cov_table, "cov_table"}};
  return names;
}

class Reader {
 public:
  Reader(const toml::table& root) : root_(root) {}

  const toml::table* section(const std::string& name) {
    const auto* node = root_.get(name);
    if (node == nullptr) return nullptr;
    const auto* tbl = node->as_table();
    if (tbl == nullptr) throw ConfigError("[" + name + "] must be a table");
    return tbl;
  }

  void check_keys(const toml::table& tbl, const std::string& where, const std::set<std::string>& allowed) {
    for (const auto& [key, _] : tbl) {
      if (allowed.count(std::string(key.str())) == 0)
        throw ConfigError("unknown key '" + std::string(key.str()) + "' in " + where);
    }
  }

  template <class T>
  void get(const toml::table* tbl, const std::string& key, T& out) {
    if (tbl == nullptr) return;
    const auto* node = tbl->get(key);
    if (node == nullptr) return;
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = node->value<double>()) out = *v;
      else throw ConfigError("'" + key + "' must be a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (auto v = node->value<bool>()) out = *v;
      else throw ConfigError("'" + key + "' must be a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = node->value<std::string>()) out = *v;
      else throw ConfigError("'" + key + "' must be a string");
    } else if constexpr (std::is_integral_v<T>) {
      auto v = node->value<std::int64_t>();
      if (!v) {
        // Accept integral floats such as 1e5.
        if (auto d = node->value<double>(); d && *d == std::floor(*d) && std::abs(*d) < 9.2e18) v = static_cast<std::int64_t>(*d);
      }
      if (!v) throw ConfigError("'" + key + "' must be an integer");
      if (std::is_unsigned_v<T> && *v < 0) throw ConfigError("'" + key + "' must be nonnegative");
      out = static_cast<T>(*v);
    }
  }

  template <class T>
  void get_list(const toml::table* tbl, const std::string& key, std::vector<T>& out) {
    if (tbl == nullptr) return;
    const auto* node = tbl->get(key);
    if (node == nullptr) return;
    const auto* arr = node->as_array();
    if (arr == nullptr) throw ConfigError("'" + key + "' must be an array");
    std::vector<T> v;
    for (const auto& el : *arr) {
      if constexpr (std::is_same_v<T, double>) {
        auto d = el.value<double>();
        if (!d) throw ConfigError("'" + key + "' must hold numbers");
        v.push_back(*d);
      } else {
        auto i = el.value<std::int64_t>();
        if (!i) {
          if (auto d = el.value<double>(); d && *d == std::floor(*d) && *d >= 0) i = static_cast<std::int64_t>(*d);
        }
        if (!i || *i < 0) throw ConfigError("'" + key + "' must hold nonnegative integers");
        v.push_back(static_cast<T>(*i));
      }
    }
    out = std::move(v);
  }

 private:
  const toml::table& root_;
};

}  // namespace

std::string to_string(ExperimentKind k) {
  for (const auto& [kind, name] : kind_names())
    if (kind == k) return name;
  return "unknown";
}

ExperimentKind parse_kind(const std::string& s) {
  for (const auto& [kind, name] : kind_names())
    if (name == s) return kind;
  throw ConfigError("unknown experiment kind '" + s + "'");
}

void ExperimentConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  if (grid.empty()) throw ConfigError("grid must not be empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] <= 1.0)) throw ConfigError("grid points must lie in (0,1]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ConfigError("grid must be strictly increasing");
  }
  if (reps < 2) throw ConfigError("reps must be at least 2");
  if (n < 1) throw ConfigError("n must be positive");
  for (auto m : n_list)
    if (m < 1) throw ConfigError("n_list entries must be positive");
  if (n_list.empty()) throw ConfigError("n_list must not be empty");
  if (!(theta > -alpha)) throw ConfigError("theta must exceed -alpha");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("t must lie in [0,1]");
  if (n_small < 1 || n_small > 8) throw ConfigError("n_small must lie in 1..8");
  if (!(kingman_trunc_mass > 0.0 && kingman_trunc_mass < 1.0)) throw ConfigError("kingman trunc_mass must lie in (0,1)");
  if (!(fclt_trunc_mass > 0.0 && fclt_trunc_mass < 1.0)) throw ConfigError("fclt trunc_mass must lie in (0,1)");
  if (paintboxes < 1) throw ConfigError("paintboxes must be positive");
  if (p_points < 2) throw ConfigError("p_points must be at least 2");
  if (!(lemma_eps > 0.0 && lemma_eps < 1.0)) throw ConfigError("lemma_eps must lie in (0,1)");
  if (cov_method != "series" && cov_method != "quadrature" && cov_method != "closed_form")
    throw ConfigError("cov method must be series, quadrature or closed_form");
  if (k_max < 64) throw ConfigError("k_max must be at least 64");
  if (alpha_prime && !(*alpha_prime >= 0.0 && *alpha_prime < alpha))
    throw ConfigError("alpha_prime must lie in [0, alpha)");
  // Labels must resolve.
  (void)parse_weights(weights);
  try {
    (void)parse_test_function(test_function);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  } catch (const std::exception&) {
    throw ConfigError("cannot parse test function '" + test_function + "'");
  }
}

ExperimentConfig parse_config(const std::string& toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config parse error: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(os.str());
  }
  Reader r(root);
  r.check_keys(root, "top level",
               {"kind", "seed", "model", "run", "cov", "techest", "crp", "localclt", "tolerances", "output"});
  ExperimentConfig cfg;
  const toml::table* top = &root;
  std::string kind;
  r.get(top, "kind", kind);
  if (kind.empty()) throw ConfigError("config needs 'kind'");
  cfg.kind = parse_kind(kind);
  r.get(top, "seed", cfg.seed);

  if (const auto* s = r.section("model")) {
    r.check_keys(*s, "[model]", {"alpha", "weights", "poissonized"});
    r.get(s, "alpha", cfg.alpha);
    r.get(s, "weights", cfg.weights);
    r.get(s, "poissonized", cfg.poissonized);
  }
  if (const auto* s = r.section("run")) {
    r.check_keys(*s, "[run]", {"n", "n_list", "grid", "reps"});
    r.get(s, "n", cfg.n);
    r.get_list(s, "n_list", cfg.n_list);
    r.get_list(s, "grid", cfg.grid);
    r.get(s, "reps", cfg.reps);
  }
  if (const auto* s = r.section("cov")) {
    r.check_keys(*s, "[cov]", {"method", "k_max", "tol"});
    r.get(s, "method", cfg.cov_method);
    r.get(s, "k_max", cfg.k_max);
    r.get(s, "tol", cfg.cov_tol);
  }
  if (const auto* s = r.section("techest")) {
    r.check_keys(*s, "[techest]", {"eps", "t", "t_list", "eps_list", "alpha_prime"});
    r.get(s, "eps", cfg.eps);
    r.get(s, "t", cfg.t);
    r.get_list(s, "t_list", cfg.t_list);
    r.get_list(s, "eps_list", cfg.eps_list);
    if (s->get("alpha_prime") != nullptr) {
      double ap = 0.0;
      r.get(s, "alpha_prime", ap);
      cfg.alpha_prime = ap;
    }
  }
  if (const auto* s = r.section("crp")) {
    r.check_keys(*s, "[crp]", {"theta", "test_function", "n_small", "check_n2", "kingman_trunc_mass",
                               "fclt_trunc_mass", "paintboxes"});
    r.get(s, "theta", cfg.theta);
    r.get(s, "test_function", cfg.test_function);
    r.get(s, "n_small", cfg.n_small);
    r.get(s, "check_n2", cfg.check_n2);
    r.get(s, "kingman_trunc_mass", cfg.kingman_trunc_mass);
    r.get(s, "fclt_trunc_mass", cfg.fclt_trunc_mass);
    r.get(s, "paintboxes", cfg.paintboxes);
  }
  if (const auto* s = r.section("localclt")) {
    r.check_keys(*s, "[localclt]", {"p_points", "lemma_eps"});
    r.get(s, "p_points", cfg.p_points);
    r.get(s, "lemma_eps", cfg.lemma_eps);
  }
  if (const auto* s = r.section("tolerances")) {
    r.check_keys(*s, "[tolerances]",
                 {"z_max", "ks_p_min", "variance_rel_tol", "techest_rel_tol", "techest_lower_max", "chi_p_min",
                  "crp_variance_rel_tol", "crp_ratio_rel_tol", "localclt_stability", "cov_abs_tol",
                  "coupling_residual_max"});
    auto& tl = cfg.tol;
    r.get(s, "z_max", tl.z_max);
    r.get(s, "ks_p_min", tl.ks_p_min);
    r.get(s, "variance_rel_tol", tl.variance_rel_tol);
    r.get(s, "techest_rel_tol", tl.techest_rel_tol);
    r.get(s, "techest_lower_max", tl.techest_lower_max);
    r.get(s, "chi_p_min", tl.chi_p_min);
    r.get(s, "crp_variance_rel_tol", tl.crp_variance_rel_tol);
    r.get(s, "crp_ratio_rel_tol", tl.crp_ratio_rel_tol);
    r.get(s, "localclt_stability", tl.localclt_stability);
    r.get(s, "cov_abs_tol", tl.cov_abs_tol);
    r.get(s, "coupling_residual_max", tl.coupling_residual_max);
  }
  if (const auto* s = r.section("output")) {
    r.check_keys(*s, "[output]", {"report", "csv"});
    r.get(s, "report", cfg.report_path);
    r.get(s, "csv", cfg.csv_path);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["kind"] = to_string(cfg.kind);
  j["seed"] = cfg.seed;
  j["model"] = {{"alpha", cfg.alpha}, {"weights", cfg.weights}, {"poissonized", cfg.poissonized}};
  j["run"] = {{"n", cfg.n}, {"n_list", cfg.n_list}, {"grid", cfg.grid}, {"reps", cfg.reps}};
  j["cov"] = {{"method", cfg.cov_method}, {"k_max", cfg.k_max}, {"tol", cfg.cov_tol}};
  j["techest"] = {{"eps", cfg.eps}, {"t", cfg.t}, {"t_list", cfg.t_list}, {"eps_list", cfg.eps_list}};
  j["techest"]["alpha_prime"] = cfg.alpha_prime ? Json(*cfg.alpha_prime) : Json(nullptr);
  j["crp"] = {{"theta", cfg.theta},
              {"test_function", cfg.test_function},
              {"n_small", cfg.n_small},
              {"check_n2", cfg.check_n2},
              {"kingman_trunc_mass", cfg.kingman_trunc_mass},
              {"fclt_trunc_mass", cfg.fclt_trunc_mass},
              {"paintboxes", cfg.paintboxes}};
  j["localclt"] = {{"p_points", cfg.p_points}, {"lemma_eps", cfg.lemma_eps}, {"log_base", "natural"}};
  const auto& tl = cfg.tol;
  j["tolerances"] = {{"z_max", tl.z_max},
                     {"ks_p_min", tl.ks_p_min},
                     {"variance_rel_tol", tl.variance_rel_tol},
                     {"techest_rel_tol", tl.techest_rel_tol},
                     {"techest_lower_max", tl.techest_lower_max},
                     {"chi_p_min", tl.chi_p_min},
                     {"crp_variance_rel_tol", tl.crp_variance_rel_tol},
                     {"crp_ratio_rel_tol", tl.crp_ratio_rel_tol},
                     {"localclt_stability", tl.localclt_stability},
                     {"cov_abs_tol", tl.cov_abs_tol},
                     {"coupling_residual_max", tl.coupling_residual_max}};
  j["output"] = {{"report", cfg.report_path}, {"csv", cfg.csv_path}};
  return j;
}

}  // namespace karlin::harness
