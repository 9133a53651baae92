#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "resil/cli/pipeline.hpp"

namespace resil::cli {

/// 6 significant digits; non-finite values spelled inf, -inf, nan.
inline std::string fmt6(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

namespace detail {

inline json num(double v) {
  if (!std::isfinite(v)) return fmt6(v);
  return std::stod(fmt6(v));
}
inline double from_num(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ConfigError("report: bad number '" + s + "'");
  }
  return j.get<double>();
}

inline std::string components(const FailurePattern& p) {
  std::string s;
  for (auto k : p.failed_components()) {
    if (!s.empty()) s += ' ';
    s += std::to_string(k);
  }
  return s;
}

inline FailurePattern pattern_from(const json& j, std::size_t n) {
  ComponentMask m = 0;
  for (auto k : j.get<std::vector<std::size_t>>()) m |= component_bit(k - 1);
  return {n, m};
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << content;
  if (!f) throw IoError("failed writing " + path);
}

}  // namespace detail

inline std::string to_csv(const RunReport& r) {
  std::ostringstream o;
  o << "scenario_id,failed_components,beta,pi,combined,resilient,beta_cov,pi_cov\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    const auto& ix = row.indices;
    o << (i + 1) << ',' << detail::components(row.scenario) << ',' << fmt6(ix.beta.value) << ','
      << (ix.pi ? fmt6(ix.pi->value) : "") << ',' << fmt6(ix.combined) << ',' << (row.resilient ? "true" : "false")
      << ',' << fmt6(ix.beta_cov) << ',' << (ix.pi ? fmt6(ix.pi_cov) : "") << '\n';
  }
  return o.str();
}

/// JSON view of a run. Wall-clock times are left out unless asked for, so
/// identical inputs give byte-identical files.
inline json to_json(const RunReport& r, bool with_times = false) {
  json j;
  j["name"] = r.name;
  j["model"] = r.model;
  j["p_threshold"] = detail::num(r.p_threshold);
  j["radius"] = detail::num(r.radius);
  const std::size_t n = r.screening.noteworthy.empty() ? 0 : r.screening.noteworthy.front().n_components;
  j["n_components"] = n ? n : (r.rows.empty() ? 0 : r.rows.front().scenario.n_components);

  json s;
  s["method"] = r.screening.method;
  s["noteworthy"] = json::array();
  for (const auto& p : r.screening.noteworthy) s["noteworthy"].push_back(p.failed_components());
  s["excluded_events"] = json::array();
  for (const auto& e : r.screening.excluded_events) {
    s["excluded_events"].push_back(FailurePattern(e.n_components, e.required_failed).failed_components());
  }
  s["predicted"] = json::array();
  for (const auto& p : r.screening.predicted) s["predicted"].push_back(p.failed_components());
  s["occurrences"] = r.screening.occurrences;
  s["n_model_calls"] = r.screening.n_model_calls;
  s["n_surrogate_calls"] = r.screening.n_surrogate_calls;
  s["history"] = json::array();
  for (const auto& h : r.screening.history) {
    s["history"].push_back({{"iteration", h.iteration},
                            {"inner_radius", detail::num(h.inner_radius)},
                            {"outer_radius", detail::num(h.outer_radius)},
                            {"convergence_ratio", detail::num(h.convergence_ratio)},
                            {"n_model_calls", h.n_model_calls},
                            {"epochs", h.epochs},
                            {"final_loss", detail::num(h.final_loss)}});
  }
  s["warnings"] = r.screening.warnings;
  j["screening"] = s;

  j["scenarios"] = json::array();
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    const auto& ix = row.indices;
    j["scenarios"].push_back({{"scenario_id", i + 1},
                              {"failed_components", row.scenario.failed_components()},
                              {"beta", detail::num(ix.beta.value)},
                              {"pi", ix.pi ? detail::num(ix.pi->value) : json(nullptr)},
                              {"combined", detail::num(ix.combined)},
                              {"resilient", row.resilient},
                              {"trivial", row.trivial},
                              {"beta_cov", detail::num(ix.beta_cov)},
                              {"pi_cov", ix.pi ? detail::num(ix.pi_cov) : json(nullptr)},
                              {"n_evaluations", row.n_evaluations}});
  }
  j["critical"] = json::array();
  for (const auto& p : r.critical) j["critical"].push_back(p.failed_components());
  j["ledger"] = {{"screening_calls", r.screening_calls},
                 {"estimation_calls", r.estimation_calls},
                 {"total_calls", r.total_calls}};
  if (with_times) {
    j["times"] = {{"screening_seconds", r.times.screening_seconds},
                  {"estimation_seconds", r.times.estimation_seconds}};
  }
  return j;
}

inline RunReport report_from_json(const json& j) {
  RunReport r;
  try {
    r.name = j.at("name").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.p_threshold = detail::from_num(j.at("p_threshold"));
    r.radius = detail::from_num(j.at("radius"));
    const auto n = j.at("n_components").get<std::size_t>();
    const auto& s = j.at("screening");
    r.screening.method = s.at("method").get<std::string>();
    for (const auto& p : s.at("noteworthy")) r.screening.noteworthy.push_back(detail::pattern_from(p, n));
    for (const auto& p : s.at("excluded_events")) {
      r.screening.excluded_events.emplace_back(n, detail::pattern_from(p, n).failed, 0);
    }
    for (const auto& p : s.at("predicted")) r.screening.predicted.push_back(detail::pattern_from(p, n));
    r.screening.occurrences = s.at("occurrences").get<std::vector<std::size_t>>();
    r.screening.n_model_calls = s.at("n_model_calls").get<std::size_t>();
    r.screening.n_surrogate_calls = s.at("n_surrogate_calls").get<std::size_t>();
    for (const auto& h : s.at("history")) {
      r.screening.history.push_back({h.at("iteration").get<std::size_t>(), detail::from_num(h.at("inner_radius")),
                                     detail::from_num(h.at("outer_radius")),
                                     detail::from_num(h.at("convergence_ratio")),
                                     h.at("n_model_calls").get<std::size_t>(), h.at("epochs").get<std::size_t>(),
                                     detail::from_num(h.at("final_loss"))});
    }
    r.screening.warnings = s.at("warnings").get<std::vector<std::string>>();
    for (const auto& row : j.at("scenarios")) {
      ScenarioIndices si;
      si.scenario = detail::pattern_from(row.at("failed_components"), n);
      const double beta = detail::from_num(row.at("beta"));
      si.indices.beta = Index{beta, !std::isfinite(beta)};
      if (!row.at("pi").is_null()) {
        const double pi = detail::from_num(row.at("pi"));
        si.indices.pi = Index{pi, !std::isfinite(pi)};
        si.indices.pi_cov = detail::from_num(row.at("pi_cov"));
      }
      si.indices.combined = detail::from_num(row.at("combined"));
      si.indices.beta_cov = detail::from_num(row.at("beta_cov"));
      si.resilient = row.at("resilient").get<bool>();
      si.trivial = row.at("trivial").get<bool>();
      si.n_evaluations = row.at("n_evaluations").get<std::size_t>();
      r.rows.push_back(si);
    }
    for (const auto& p : j.at("critical")) r.critical.push_back(detail::pattern_from(p, n));
    const auto& l = j.at("ledger");
    r.screening_calls = l.at("screening_calls").get<std::size_t>();
    r.estimation_calls = l.at("estimation_calls").get<std::size_t>();
    r.total_calls = l.at("total_calls").get<std::size_t>();
    if (j.contains("times")) {
      r.times.screening_seconds = j["times"].at("screening_seconds").get<double>();
      r.times.estimation_seconds = j["times"].at("estimation_seconds").get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("report JSON: ") + e.what());
  }
  return r;
}

inline void export_results(const RunReport& r, const std::string& format, const std::string& path) {
  if (format == "csv") {
    detail::write_file(path, to_csv(r));
  } else if (format == "json") {
    detail::write_file(path, to_json(r).dump(2) + "\n");
  } else {
    throw ConfigError("export format must be csv or json");
  }
}

/// Boundary pi(beta) of Phi(-beta) Phi(-pi) = p; defined for beta < radius.
inline double threshold_curve_pi(double beta, double p_threshold) {
  const double q = p_threshold / prob_from_beta(beta);
  if (!(q < 1.0)) return -std::numeric_limits<double>::infinity();
  return -std_normal_inv_cdf(q);
}

/// Beta-pi scatter with the threshold boundary; 800x600, hand-written SVG.
inline std::string render_beta_pi_svg(const RunReport& r, double p_threshold) {
  constexpr double W = 800.0, H = 600.0, ml = 70.0, mr = 30.0, mt = 30.0, mb = 60.0;
  const double R = -std_normal_inv_cdf(p_threshold);
  double bmin = -1.0, bmax = R + 1.5, pmin = -4.0, pmax = R + 1.5;
  for (const auto& row : r.rows) {
    if (!row.indices.pi) continue;
    const double b = row.indices.beta.value, p = row.indices.pi->value;
    if (std::isfinite(b)) bmin = std::min(bmin, std::floor(b) - 0.5), bmax = std::max(bmax, std::ceil(b) + 0.5);
    if (std::isfinite(p)) pmin = std::min(pmin, std::floor(p) - 0.5), pmax = std::max(pmax, std::ceil(p) + 0.5);
  }
  pmin = std::max(pmin, -10.0);
  auto X = [&](double b) { return ml + (b - bmin) / (bmax - bmin) * (W - ml - mr); };
  auto Y = [&](double p) { return H - mb - (std::clamp(p, pmin, pmax) - pmin) / (pmax - pmin) * (H - mt - mb); };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n"
    << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
  // axes and ticks
  o << "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n"
    << "<line x1=\"" << fmt6(ml) << "\" y1=\"" << fmt6(H - mb) << "\" x2=\"" << fmt6(W - mr) << "\" y2=\"" << fmt6(H - mb)
    << "\"/>\n"
    << "<line x1=\"" << fmt6(ml) << "\" y1=\"" << fmt6(mt) << "\" x2=\"" << fmt6(ml) << "\" y2=\"" << fmt6(H - mb)
    << "\"/>\n</g>\n";
  o << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"black\">\n";
  for (double b = std::ceil(bmin); b <= bmax; b += 1.0) {
    o << "<line x1=\"" << fmt6(X(b)) << "\" y1=\"" << fmt6(H - mb) << "\" x2=\"" << fmt6(X(b)) << "\" y2=\""
      << fmt6(H - mb + 5) << "\" stroke=\"black\"/>"
      << "<text x=\"" << fmt6(X(b)) << "\" y=\"" << fmt6(H - mb + 20) << "\" text-anchor=\"middle\">" << fmt6(b)
      << "</text>\n";
  }
  for (double p = std::ceil(pmin); p <= pmax; p += 1.0) {
    o << "<line x1=\"" << fmt6(ml - 5) << "\" y1=\"" << fmt6(Y(p)) << "\" x2=\"" << fmt6(ml) << "\" y2=\"" << fmt6(Y(p))
      << "\" stroke=\"black\"/>"
      << "<text x=\"" << fmt6(ml - 8) << "\" y=\"" << fmt6(Y(p) + 4) << "\" text-anchor=\"end\">" << fmt6(p)
      << "</text>\n";
  }
  o << "<text x=\"" << fmt6((ml + W - mr) / 2) << "\" y=\"" << fmt6(H - 15)
    << "\" text-anchor=\"middle\">reliability index beta</text>\n"
    << "<text x=\"18\" y=\"" << fmt6((mt + H - mb) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << fmt6((mt + H - mb) / 2) << ")\">redundancy index pi</text>\n</g>\n";

  // threshold boundary: sampled densely up to beta -> R where pi -> -inf
  o << "<polyline id=\"threshold\" fill=\"none\" stroke=\"black\" stroke-dasharray=\"6 4\" stroke-width=\"1.5\" points=\"";
  const int steps = 400;
  bool first = true;
  for (int i = 0; i <= steps; ++i) {
    const double b = bmin + (std::min(bmax, R) - bmin) * i / steps;
    const double p = threshold_curve_pi(b, p_threshold);
    if (!(p >= pmin) && !first) {
      o << ' ' << fmt6(X(b)) << ',' << fmt6(Y(pmin));
      break;
    }
    o << (first ? "" : " ") << fmt6(X(b)) << ',' << fmt6(Y(p));
    first = false;
  }
  o << "\"/>\n";

  // scenario markers
  o << "<g id=\"points\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (const auto& row : r.rows) {
    if (!row.indices.pi) continue;
    const double cx = X(std::clamp(row.indices.beta.value, bmin, bmax));
    const double cy = Y(row.indices.pi->value);
    const bool crit = !row.resilient;
    o << "<circle class=\"" << (crit ? "critical" : "resilient") << "\" cx=\"" << fmt6(cx) << "\" cy=\"" << fmt6(cy)
      << "\" r=\"5\" fill=\"" << (crit ? "red" : "steelblue") << "\"/>";
    if (crit) {
      o << "<text x=\"" << fmt6(cx + 7) << "\" y=\"" << fmt6(cy - 7) << "\" fill=\"red\">{"
        << row.scenario.label() << "}</text>";
    }
    o << "\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

inline void write_svg(const RunReport& r, double p_threshold, const std::string& path) {
  detail::write_file(path, render_beta_pi_svg(r, p_threshold));
}

}  // namespace resil::cli
