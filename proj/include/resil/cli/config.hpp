#pragma once

#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "resil/daniels.hpp"
#include "resil/engines/cross_entropy.hpp"
#include "resil/engines/estimate.hpp"
#include "resil/engines/subset.hpp"
#include "resil/random_model.hpp"
#include "resil/resilience.hpp"
#include "resil/screening/adaptive.hpp"
#include "resil/screening/screening.hpp"
#include "resil/shear_frame.hpp"
#include "resil/truss.hpp"

namespace resil::cli {

using nlohmann::json;

enum class ScreeningMethod { sequential, nball, adaptive, enumerate };

inline std::string to_string(ScreeningMethod m) {
  switch (m) {
    case ScreeningMethod::sequential: return "sequential";
    case ScreeningMethod::nball: return "nball";
    case ScreeningMethod::adaptive: return "adaptive";
    case ScreeningMethod::enumerate: return "enumerate";
  }
  return "?";
}

inline ScreeningMethod parse_method(const std::string& s, const std::string& path = "screening.method") {
  if (s == "sequential") return ScreeningMethod::sequential;
  if (s == "nball") return ScreeningMethod::nball;
  if (s == "adaptive") return ScreeningMethod::adaptive;
  if (s == "enumerate") return ScreeningMethod::enumerate;
  throw ConfigError(path + ": unknown screening method '" + s + "' (sequential, nball, adaptive, enumerate)");
}

/// Reliability engine selection plus its knobs. "auto" picks CE-AIS with the
/// vMF-Nakagami family above dimension 10 and Gaussian mixtures otherwise.
struct EngineSpec {
  std::string type = "auto";
  McsOptions mcs;
  CeOptions ce;
  SubsetOptions subset;
  std::size_t analytic_pi_samples = 100000;
  PiMode pi_mode = PiMode::conditional;
  std::size_t imposed_samples = 100000;
};

inline std::unique_ptr<ReliabilityEngine> make_engine(const EngineSpec& e, std::size_t dim) {
  std::string t = e.type;
  if (t == "auto") t = dim > 10 ? "ce-ais-vmfm" : "ce-ais-gm";
  if (t == "analytic") return std::make_unique<AnalyticEngine>(e.analytic_pi_samples);
  if (t == "mcs") return std::make_unique<McsEngine>(e.mcs);
  if (t == "subset") return std::make_unique<SubsetEngine>(e.subset);
  if (t == "ce-ais-gm" || t == "ce-ais-vmfm") {
    CeOptions o = e.ce;
    o.family = t == "ce-ais-gm" ? MixtureFamily::gaussian_mixture : MixtureFamily::vmf_mixture;
    return std::make_unique<CeAisEngine>(o);
  }
  throw ConfigError("engine.type: unknown engine '" + e.type + "'");
}

struct ScreeningSpec {
  ScreeningMethod method = ScreeningMethod::sequential;
  SequentialOptions sequential;
  EngineSpec engine;  // event probabilities during sequential search
  std::optional<std::size_t> nball_samples;
  double nball_radius_factor = 1.0;
  double nball_per_decade = 0.25;
  AdaptiveConfig adaptive;
  /// Adaptive only: also treat surrogate-predicted patterns as noteworthy.
  bool include_predicted = false;
};

struct OutputSpec {
  std::optional<std::string> csv;
  std::optional<std::string> json;
  std::optional<std::string> svg;
  std::optional<std::string> weights;
};

using ModelSpec = std::variant<DanielsConfig, TrussConfig, ShearFrameConfig>;

struct AnalysisConfig {
  std::string name;
  ModelSpec model;
  std::vector<Marginal> marginals;
  Eigen::MatrixXd correlation;
  ResilienceThreshold threshold = ResilienceThreshold::direct(1e-4);
  ScreeningSpec screening;
  EngineSpec engine;
  /// `estimate` subcommand: scenarios to evaluate; empty means all.
  std::vector<FailurePattern> scenarios;
  std::uint64_t seed = 0;
  OutputSpec output;

  std::unique_ptr<StructuralModel> build_model() const {
    return std::visit(
        [](const auto& c) -> std::unique_ptr<StructuralModel> {
          using C = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<C, DanielsConfig>) return std::make_unique<DanielsSystem>(c);
          if constexpr (std::is_same_v<C, TrussConfig>) return std::make_unique<TrussModel>(c);
          if constexpr (std::is_same_v<C, ShearFrameConfig>) return std::make_unique<ShearFrameModel>(c);
        },
        model);
  }
  RandomModel build_random_model() const { return RandomModel(marginals, correlation); }
  std::string model_type() const {
    return std::visit(
        [](const auto& c) -> std::string {
          using C = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<C, DanielsConfig>) return "daniels";
          if constexpr (std::is_same_v<C, TrussConfig>) return "truss";
          if constexpr (std::is_same_v<C, ShearFrameConfig>) return "shear_frame";
        },
        model);
  }
};

namespace detail {

/// JSON object reader that rejects unknown keys and reports field paths.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& raw(const std::string& key) {
    if (!has(key)) throw ConfigError(at(key) + ": required field missing");
    return j_.at(key);
  }

  template <class T>
  T get(const std::string& key) {
    const json& v = raw(key);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(at(key) + ": wrong type");
    }
  }
  template <class T>
  T get(const std::string& key, T fallback) {
    return has(key) ? get<T>(key) : fallback;
  }
  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(at(key) + ": expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }
  std::size_t count(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(at(key) + ": expected a non-negative integer");
    return v.get<std::size_t>();
  }
  std::size_t count(const std::string& key, std::size_t fallback) { return has(key) ? count(key) : fallback; }
  Reader object(const std::string& key) { return Reader(raw(key), at(key)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(at(it.key()) + ": unknown key");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline Dof parse_dof(const std::string& s, const std::string& path) {
  if (s == "x") return Dof::x;
  if (s == "y") return Dof::y;
  throw ConfigError(path + ": dof must be \"x\" or \"y\"");
}

inline DanielsConfig parse_daniels(Reader& r) {
  DanielsConfig c;
  c.layers = r.get<std::vector<std::vector<double>>>("layers");
  c.load = r.number("load");
  const auto red = r.get<std::string>("redistribution", "single_step");
  if (red == "single_step") {
    c.redistribution = Redistribution::single_step;
  } else if (red == "full") {
    c.redistribution = Redistribution::full;
  } else {
    throw ConfigError(r.at("redistribution") + ": expected \"single_step\" or \"full\"");
  }
  return c;
}

inline TrussConfig parse_truss(Reader& r) {
  TrussConfig c;
  const json& nodes = r.raw("nodes");
  if (!nodes.is_array()) throw ConfigError(r.at("nodes") + ": expected an array of [x, y]");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (!n.is_array() || n.size() != 2 || !n[0].is_number() || !n[1].is_number()) {
      throw ConfigError(r.at("nodes") + "[" + std::to_string(i) + "]: expected [x, y]");
    }
    c.nodes.push_back({n[0].get<double>(), n[1].get<double>()});
  }
  const json& members = r.raw("members");
  if (!members.is_array()) throw ConfigError(r.at("members") + ": expected an array");
  for (std::size_t k = 0; k < members.size(); ++k) {
    Reader m(members[k], r.at("members") + "[" + std::to_string(k) + "]");
    const auto ends = m.get<std::vector<std::size_t>>("nodes");
    if (ends.size() != 2) throw ConfigError(m.at("nodes") + ": expected two node indices");
    c.members.push_back({ends[0], ends[1], m.number("area"), m.number("modulus")});
    m.finish();
  }
  const json& supports = r.raw("supports");
  for (std::size_t k = 0; k < supports.size(); ++k) {
    Reader s(supports[k], r.at("supports") + "[" + std::to_string(k) + "]");
    c.supports.push_back({s.count("node"), parse_dof(s.get<std::string>("dof"), s.at("dof"))});
    s.finish();
  }
  const json& loads = r.raw("loads");
  for (std::size_t k = 0; k < loads.size(); ++k) {
    Reader l(loads[k], r.at("loads") + "[" + std::to_string(k) + "]");
    TrussLoad t;
    t.node = l.count("node");
    t.dof = parse_dof(l.get<std::string>("dof"), l.at("dof"));
    if (l.has("variable")) t.variable = l.count("variable");
    t.value = l.number("value", 0.0);
    t.scale = l.number("scale", 1.0);
    l.finish();
    c.loads.push_back(t);
  }
  const json& yields = r.raw("yields");
  for (std::size_t k = 0; k < yields.size(); ++k) {
    Reader y(yields[k], r.at("yields") + "[" + std::to_string(k) + "]");
    YieldSource s;
    if (y.has("variable")) s.variable = y.count("variable");
    s.value = y.number("value", 0.0);
    s.scale = y.number("scale", 1.0);
    y.finish();
    c.yields.push_back(s);
  }
  c.damage_stiffness_factor = r.number("damage_stiffness_factor", c.damage_stiffness_factor);
  if (r.has("rupture_ratio")) c.rupture_ratio = r.number("rupture_ratio");
  c.condition_limit = r.number("condition_limit", c.condition_limit);
  if (r.has("system_failure")) {
    Reader sf = r.object("system_failure");
    const auto rule = sf.get<std::string>("rule");
    if (rule == "instability") {
      c.system_rule = InstabilityRule{};
    } else if (rule == "max_failed") {
      c.system_rule = MaxFailedCountRule{sf.count("max_failed")};
    } else if (rule == "drift") {
      DriftLimitRule d;
      d.node = sf.count("node");
      d.dof = parse_dof(sf.get<std::string>("dof", "x"), sf.at("dof"));
      d.height = sf.number("height");
      d.limit = sf.number("limit");
      c.system_rule = d;
    } else {
      throw ConfigError(sf.at("rule") + ": expected instability, max_failed or drift");
    }
    sf.finish();
  }
  return c;
}

inline ShearFrameConfig parse_shear_frame(Reader& r) {
  ShearFrameConfig c;
  const json& stories = r.raw("stories");
  for (std::size_t k = 0; k < stories.size(); ++k) {
    Reader s(stories[k], r.at("stories") + "[" + std::to_string(k) + "]");
    c.stories.push_back({s.number("strong_stiffness"), s.number("weak_stiffness"), s.number("weak_capacity"),
                         s.number("height")});
    s.finish();
  }
  c.force_variable = r.get<std::vector<std::size_t>>("force_variable");
  c.force_scale = r.get<std::vector<double>>("force_scale", {});
  c.damage_stiffness_factor = r.number("damage_stiffness_factor", c.damage_stiffness_factor);
  c.roof_drift_limit = r.number("roof_drift_limit", c.roof_drift_limit);
  return c;
}

inline Marginal parse_marginal(Reader& m) {
  const auto kind = m.get<std::string>("kind");
  const double mean = m.number("mean");
  Marginal out;
  if (kind == "normal") {
    if (m.has("sd")) {
      if (m.has("cov")) throw ConfigError(m.path() + ": give either cov or sd, not both");
      out = Marginal::normal_sd(mean, m.number("sd"));
    } else {
      out = Marginal::normal(mean, m.number("cov"));
    }
  } else if (kind == "lognormal") {
    out = Marginal::lognormal(mean, m.number("cov"));
  } else {
    throw ConfigError(m.at("kind") + ": expected \"normal\" or \"lognormal\"");
  }
  try {
    out.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(m.path() + ": " + e.what());
  }
  return out;
}

inline void parse_engine(Reader& r, EngineSpec& e) {
  e.type = r.get<std::string>("type", e.type);
  static const std::set<std::string> types = {"auto", "analytic", "mcs", "ce-ais-gm", "ce-ais-vmfm", "subset"};
  if (!types.count(e.type)) throw ConfigError(r.at("type") + ": unknown engine '" + e.type + "'");
  e.mcs.n_samples = r.count("n_samples", e.mcs.n_samples);
  e.mcs.latin_hypercube = r.get<bool>("latin_hypercube", e.mcs.latin_hypercube);
  const std::size_t npl = r.count("n_per_level", 0);
  if (npl) {
    e.ce.n_per_level = npl;
    e.subset.n_per_level = npl;
  }
  e.ce.n_mixtures = static_cast<int>(r.count("n_mixtures", static_cast<std::size_t>(e.ce.n_mixtures)));
  e.ce.elite_fraction = r.number("elite_fraction", e.ce.elite_fraction);
  e.ce.target_cov = r.number("target_cov", e.ce.target_cov);
  if (r.has("max_levels")) {
    e.ce.max_levels = static_cast<int>(r.count("max_levels"));
    e.subset.max_levels = e.ce.max_levels;
  }
  e.ce.gm_min_variance = r.number("gm_min_variance", e.ce.gm_min_variance);
  e.ce.vmfn_max_radial_rate = r.number("vmfn_max_radial_rate", e.ce.vmfn_max_radial_rate);
  e.subset.p0 = r.number("p0", e.subset.p0);
  e.analytic_pi_samples = r.count("pi_samples", e.analytic_pi_samples);
  const auto mode = r.get<std::string>("pi_mode", "conditional");
  if (mode == "conditional") {
    e.pi_mode = PiMode::conditional;
  } else if (mode == "imposed_damage") {
    e.pi_mode = PiMode::imposed_damage;
  } else {
    throw ConfigError(r.at("pi_mode") + ": expected \"conditional\" or \"imposed_damage\"");
  }
  e.imposed_samples = r.count("imposed_samples", e.imposed_samples);
  try {
    e.ce.validate();
    e.subset.validate();
    if (e.mcs.n_samples < 1) throw ConfigError("n_samples must be >= 1");
  } catch (const ConfigError& err) {
    throw ConfigError(r.path() + ": " + err.what());
  }
  r.finish();
}

inline void parse_adaptive(Reader& r, AdaptiveConfig& a) {
  a.radius_factor = r.number("radius_factor", a.radius_factor);
  a.n_rings = r.count("n_rings", a.n_rings);
  a.epochs_initial = r.count("epochs_initial", a.epochs_initial);
  a.epochs_increment = r.count("epochs_increment", a.epochs_increment);
  a.epochs_max = r.count("epochs_max", a.epochs_max);
  a.batch_size = r.count("batch_size", a.batch_size);
  a.conv_ratio_tol = r.number("conv_ratio_tol", a.conv_ratio_tol);
  a.probe_count = r.count("probe_count", a.probe_count);
  a.n_candidates = r.count("n_candidates", a.n_candidates);
  a.max_iterations = r.count("max_iterations", a.max_iterations);
  a.hidden = r.get<std::vector<std::size_t>>("hidden", a.hidden);
  a.learning_rate = r.number("learning_rate", a.learning_rate);
  a.warm_start = r.get<bool>("warm_start", a.warm_start);
  a.crossover = r.get<bool>("crossover", a.crossover);
  a.crossover_probability = r.number("crossover_probability", a.crossover_probability);
  try {
    a.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(r.path() + ": " + err.what());
  }
  r.finish();
}

inline std::vector<Marginal> parse_marginals(Reader& rv) {
  std::vector<Marginal> out;
  const json& arr = rv.raw("marginals");
  if (!arr.is_array() || arr.empty()) throw ConfigError(rv.at("marginals") + ": expected a non-empty array");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    Reader m(arr[i], rv.at("marginals") + "[" + std::to_string(i) + "]");
    const std::size_t repeat = m.count("repeat", 1);
    if (repeat < 1) throw ConfigError(m.at("repeat") + ": must be >= 1");
    const Marginal mg = parse_marginal(m);
    m.finish();
    out.insert(out.end(), repeat, mg);
  }
  return out;
}

inline Eigen::MatrixXd parse_correlation(Reader& rv, std::size_t d) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  const bool full = rv.has("correlation");
  const bool pairs = rv.has("correlation_pairs");
  if (full && pairs) throw ConfigError(rv.path() + ": give correlation or correlation_pairs, not both");
  if (full) {
    const auto m = rv.get<std::vector<std::vector<double>>>("correlation");
    if (m.size() != d) throw ConfigError(rv.at("correlation") + ": must be " + std::to_string(d) + "x" + std::to_string(d));
    for (std::size_t i = 0; i < d; ++i) {
      if (m[i].size() != d) throw ConfigError(rv.at("correlation") + ": row " + std::to_string(i) + " has the wrong length");
      for (std::size_t j = 0; j < d; ++j) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i][j];
    }
  }
  if (pairs) {
    const json& arr = rv.raw("correlation_pairs");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      Reader p(arr[k], rv.at("correlation_pairs") + "[" + std::to_string(k) + "]");
      const std::size_t i = p.count("i");
      const std::size_t j = p.count("j");
      const double rho = p.number("rho");
      p.finish();
      if (i >= d || j >= d || i == j) throw ConfigError(p.path() + ": invalid variable pair");
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rho;
      c(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = rho;
    }
  }
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      const std::string at = rv.path() + ".correlation[" + std::to_string(i) + "][" + std::to_string(j) + "]";
      if (i == j && c(i, j) != 1.0) throw ConfigError(at + ": diagonal entries must be 1");
      if (i != j && !(std::fabs(c(i, j)) < 1.0)) throw ConfigError(at + ": |rho| must be < 1");
      if (c(i, j) != c(j, i)) throw ConfigError(at + ": matrix must be symmetric");
    }
  }
  return c;
}

inline ResilienceThreshold parse_threshold(Reader& t) {
  const bool direct = t.has("p_threshold");
  const bool dm = t.has("p_dm") || t.has("lambda_H") || t.has("n_scenarios");
  if (direct && dm) {
    throw ConfigError(t.path() + ": threshold given both directly (p_threshold) and via p_dm/lambda_H/n_scenarios");
  }
  if (direct) return ResilienceThreshold::direct(t.number("p_threshold"));
  if (!dm) throw ConfigError(t.path() + ": need p_threshold or p_dm + lambda_H + n_scenarios");
  return ResilienceThreshold::from_de_minimis(t.number("p_dm"), t.number("lambda_H"), t.number("n_scenarios"));
}

}  // namespace detail

/// Parse and validate an analysis configuration held in memory.
inline AnalysisConfig parse_config(const json& root) {
  detail::Reader r(root, "");
  AnalysisConfig cfg;
  cfg.name = r.get<std::string>("name", "");
  r.get<std::string>("description", "");

  {
    detail::Reader m = r.object("model");
    const auto type = m.get<std::string>("type");
    if (type == "daniels") {
      cfg.model = detail::parse_daniels(m);
    } else if (type == "truss") {
      cfg.model = detail::parse_truss(m);
    } else if (type == "shear_frame") {
      cfg.model = detail::parse_shear_frame(m);
    } else {
      throw ConfigError("model.type: expected daniels, truss or shear_frame");
    }
    m.finish();
  }

  {
    detail::Reader rv = r.object("random_variables");
    cfg.marginals = detail::parse_marginals(rv);
    cfg.correlation = detail::parse_correlation(rv, cfg.marginals.size());
    rv.finish();
  }
  // Model n_variables follows the random model for truss/frame configs.
  std::visit(
      [&](auto& c) {
        using C = std::decay_t<decltype(c)>;
        if constexpr (!std::is_same_v<C, DanielsConfig>) c.n_variables = cfg.marginals.size();
      },
      cfg.model);

  {
    detail::Reader t = r.object("threshold");
    cfg.threshold = detail::parse_threshold(t);
    t.finish();
  }

  if (r.has("screening")) {
    detail::Reader s = r.object("screening");
    cfg.screening.method = parse_method(s.get<std::string>("method", "sequential"));
    cfg.screening.sequential.include_null = s.get<bool>("include_null", false);
    cfg.screening.sequential.max_order = s.count("max_order", cfg.screening.sequential.max_order);
    if (s.has("engine")) {
      detail::Reader e = s.object("engine");
      detail::parse_engine(e, cfg.screening.engine);
    }
    if (s.has("n_samples")) cfg.screening.nball_samples = s.count("n_samples");
    cfg.screening.nball_radius_factor = s.number("radius_factor", cfg.screening.nball_radius_factor);
    cfg.screening.nball_per_decade = s.number("samples_per_decade", cfg.screening.nball_per_decade);
    if (!(cfg.screening.nball_radius_factor >= 1.0)) throw ConfigError("screening.radius_factor: must be >= 1");
    if (cfg.screening.nball_samples && *cfg.screening.nball_samples < 1) {
      throw ConfigError("screening.n_samples: must be >= 1");
    }
    if (s.has("adaptive")) {
      detail::Reader a = s.object("adaptive");
      detail::parse_adaptive(a, cfg.screening.adaptive);
    }
    cfg.screening.include_predicted = s.get<bool>("include_predicted", false);
    s.finish();
  }

  if (r.has("engine")) {
    detail::Reader e = r.object("engine");
    detail::parse_engine(e, cfg.engine);
  }

  if (r.has("scenarios")) {
    const json& arr = r.raw("scenarios");
    if (!arr.is_array()) throw ConfigError("scenarios: expected an array of failed-component lists");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      std::vector<std::size_t> failed;
      try {
        failed = arr[i].get<std::vector<std::size_t>>();
      } catch (const json::exception&) {
        throw ConfigError("scenarios[" + std::to_string(i) + "]: expected a list of 1-based component ids");
      }
      cfg.scenarios.push_back(FailurePattern{});  // placeholder, resolved below
      cfg.scenarios.back().failed = 0;
      for (auto k : failed) {
        if (k < 1 || k > kMaxComponents) throw ConfigError("scenarios[" + std::to_string(i) + "]: component ids are 1-based");
        cfg.scenarios.back().failed |= component_bit(k - 1);
      }
    }
  }

  cfg.seed = r.get<std::uint64_t>("seed", 0);
  cfg.screening.adaptive.seed = cfg.seed;

  if (r.has("output")) {
    detail::Reader o = r.object("output");
    if (o.has("csv")) cfg.output.csv = o.get<std::string>("csv");
    if (o.has("json")) cfg.output.json = o.get<std::string>("json");
    if (o.has("svg")) cfg.output.svg = o.get<std::string>("svg");
    if (o.has("weights")) cfg.output.weights = o.get<std::string>("weights");
    o.finish();
  }
  r.finish();

  // Semantic checks that need the assembled pieces.
  std::unique_ptr<StructuralModel> model;
  try {
    model = cfg.build_model();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  if (model->n_variables() != cfg.marginals.size()) {
    throw ConfigError("random_variables.marginals: model needs " + std::to_string(model->n_variables()) +
                      " variables, " + std::to_string(cfg.marginals.size()) + " given");
  }
  try {
    (void)cfg.build_random_model();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("random_variables: ") + e.what());
  }
  for (auto& s : cfg.scenarios) {
    s.n_components = model->n_components();
    if ((s.failed & ~full_mask(s.n_components)) != 0) throw ConfigError("scenarios: component id beyond the model");
  }
  return cfg;
}

inline AnalysisConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file " + path);
  json j;
  try {
    f >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": JSON parse error: " + e.what());
  }
  try {
    return parse_config(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace resil::cli
