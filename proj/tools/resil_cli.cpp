// Command-line front end: screen, estimate, run, plot.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "resil/cli/export.hpp"

namespace fs = std::filesystem;
using namespace resil;
using namespace resil::cli;

namespace {

enum Exit { ok = 0, config_error = 2, convergence_error = 3, io_error = 4 };

struct Overrides {
  std::string config;
  std::optional<std::string> method;
  std::optional<double> threshold;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string report;
};

AnalysisConfig load(const Overrides& o) {
  AnalysisConfig cfg = load_config(o.config);
  if (o.method) cfg.screening.method = parse_method(*o.method);
  if (o.threshold) cfg.threshold = ResilienceThreshold::direct(*o.threshold);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.screening.adaptive.seed = *o.seed;
  }
  return cfg;
}

std::string out_path(const Overrides& o, const std::optional<std::string>& configured, const std::string& fallback) {
  const fs::path p = configured ? fs::path(*configured) : fs::path(fallback);
  if (p.is_absolute()) return p.string();
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw IoError("cannot create output directory " + o.out);
  return (fs::path(o.out) / p).string();
}

std::string stem(const AnalysisConfig& cfg) { return cfg.name.empty() ? "results" : cfg.name; }

void summarize(const RunReport& r) {
  std::cout << r.screening.method << ": " << r.screening.noteworthy.size() << " noteworthy scenario(s)\n";
  for (const auto& row : r.rows) {
    std::cout << "  {" << row.scenario.label() << "}  beta " << fmt6(row.indices.beta.value) << "  pi "
              << (row.indices.pi ? fmt6(row.indices.pi->value) : std::string("-")) << "  combined "
              << fmt6(row.indices.combined) << (row.resilient ? "" : "  CRITICAL") << '\n';
  }
  std::cout << "critical: " << r.critical.size() << "  model calls: " << r.screening_calls << " + "
            << r.estimation_calls << " = " << r.total_calls << '\n';
  std::cerr << "time: screening " << r.times.screening_seconds << " s, estimation " << r.times.estimation_seconds
            << " s\n";
}

void write_all(const Overrides& o, const AnalysisConfig& cfg, const RunReport& r) {
  const auto csv = out_path(o, cfg.output.csv, stem(cfg) + ".csv");
  const auto js = out_path(o, cfg.output.json, stem(cfg) + ".json");
  const auto svg = out_path(o, cfg.output.svg, stem(cfg) + ".svg");
  export_results(r, "csv", csv);
  export_results(r, "json", js);
  write_svg(r, r.p_threshold, svg);
  std::cout << "wrote " << csv << ", " << js << ", " << svg << '\n';
}

int cmd_screen(const Overrides& o) {
  const auto cfg = load(o);
  const auto model = cfg.build_model();
  const auto rm = cfg.build_random_model();
  CountingModel counted(*model);
  SurrogateNet net(1, {1}, 1, 0);
  const bool keep = cfg.screening.method == ScreeningMethod::adaptive && cfg.output.weights;

  RunReport r;
  r.name = cfg.name;
  r.model = cfg.model_type();
  r.p_threshold = cfg.threshold.p_threshold();
  r.radius = cfg.threshold.radius();
  r.screening = run_screening(cfg, counted, rm, keep ? &net : nullptr);
  r.screening_calls = r.total_calls = counted.calls();

  std::cout << r.screening.method << ": " << r.screening.noteworthy.size() << " noteworthy scenario(s)\n";
  for (const auto& p : r.screening.noteworthy) std::cout << "  {" << p.label() << "}\n";
  for (const auto& w : r.screening.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "model calls: " << r.screening_calls << '\n';

  const auto js = out_path(o, std::nullopt, stem(cfg) + "_screening.json");
  export_results(r, "json", js);
  std::cout << "wrote " << js << '\n';
  if (keep) {
    const auto w = out_path(o, cfg.output.weights, stem(cfg) + "_weights.json");
    net.save(w);
    std::cout << "wrote " << w << '\n';
  }
  return ok;
}

int cmd_estimate(const Overrides& o) {
  const auto cfg = load(o);
  const auto r = run_estimate_only(cfg);
  summarize(r);
  write_all(o, cfg, r);
  return ok;
}

int cmd_run(const Overrides& o) {
  const auto cfg = load(o);
  SurrogateNet net(1, {1}, 1, 0);
  const bool keep = cfg.screening.method == ScreeningMethod::adaptive && cfg.output.weights;
  const auto r = run_pipeline(cfg, keep ? &net : nullptr);
  summarize(r);
  write_all(o, cfg, r);
  if (keep) net.save(out_path(o, cfg.output.weights, stem(cfg) + "_weights.json"));
  return ok;
}

int cmd_plot(const Overrides& o) {
  std::ifstream f(o.report);
  if (!f) throw IoError("cannot open " + o.report);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(o.report + ": " + e.what());
  }
  const auto r = report_from_json(j);
  const double p = o.threshold.value_or(r.p_threshold);
  const auto svg = out_path(o, std::nullopt, fs::path(o.report).stem().string() + ".svg");
  write_svg(r, p, svg);
  std::cout << "wrote " << svg << '\n';
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Screening and reliability/redundancy analysis of initial disruption scenarios"};
  app.require_subcommand(1);
  Overrides o;

  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config,-c", o.config, "analysis configuration (JSON)");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--threshold,-t", o.threshold, "override p_threshold")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--out,-o", o.out, "output directory");
  };
  auto* screen = app.add_subcommand("screen", "identify noteworthy scenarios");
  auto* estimate = app.add_subcommand("estimate", "estimate indices for the configured scenarios");
  auto* run = app.add_subcommand("run", "screen, estimate and classify");
  auto* plot = app.add_subcommand("plot", "render a beta-pi diagram from a JSON report");
  for (auto* s : {screen, estimate, run}) {
    common(s, true);
    s->add_option("--seed,-s", o.seed, "override seed");
  }
  for (auto* s : {screen, run}) {
    s->add_option("--method,-m", o.method, "override screening method")
        ->check(CLI::IsMember({"sequential", "nball", "adaptive", "enumerate"}));
  }
  common(plot, false);
  plot->add_option("--report,-r", o.report, "report JSON written by run/estimate")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : config_error;
  }

  try {
    if (*screen) return cmd_screen(o);
    if (*estimate) return cmd_estimate(o);
    if (*run) return cmd_run(o);
    return cmd_plot(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const ConvergenceError& e) {
    std::cerr << "non-convergence: " << e.what() << '\n';
    return convergence_error;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return io_error;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return config_error;
  }
}
