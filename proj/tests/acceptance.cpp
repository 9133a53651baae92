// End-to-end acceptance checks; prints one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "resil/cli/pipeline.hpp"

using namespace resil;
using namespace resil::cli;

namespace {

using Masks = std::set<ComponentMask>;

std::string source(const std::string& rel) { return std::string(RESIL_SOURCE_DIR) + "/" + rel; }

Masks masks(const std::vector<FailurePattern>& v) {
  Masks s;
  for (const auto& p : v) s.insert(p.failed);
  return s;
}

bool contains_all(const Masks& big, const Masks& small) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

std::string show(const Masks& s, std::size_t n) {
  std::string out;
  for (auto m : s) out += (out.empty() ? "{" : " {") + FailurePattern(n, m).label() + "}";
  return out.empty() ? "none" : out;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream why;
  void fail(const std::string& s) {
    pass = false;
    why << " [" << s << "]";
  }
};

int failures = 0;

void report(int id, const std::string& title, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.fail(std::string("exception: ") + e.what());
  }
  if (!o.pass) ++failures;
  std::printf("%s  criterion %d: %s (%.1f s)%s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), elapsed(t0),
              o.why.str().c_str());
  std::fflush(stdout);
}

// Independent bar failure probabilities: each bar of a layer carries load / n.
std::vector<double> daniels_bar_probabilities(const DanielsConfig& c, const std::vector<Marginal>& mg) {
  std::vector<double> p;
  std::size_t k = 0;
  for (const auto& layer : c.layers) {
    for (double area : layer) {
      const double stress = c.load / static_cast<double>(layer.size()) / area;
      const auto& m = mg[k++];
      double z;
      if (m.kind == MarginalKind::normal) {
        z = (stress - m.mean) / (m.mean * m.cov);
      } else {
        const double s2 = std::log1p(m.cov * m.cov);
        z = (std::log(stress) - std::log(m.mean) + 0.5 * s2) / std::sqrt(s2);
      }
      p.push_back(0.5 * std::erfc(-z / std::sqrt(2.0)));
    }
  }
  return p;
}

// Brute force over all 2^n patterns, null included.
Masks brute_force(const std::vector<double>& p, double t) {
  Masks out;
  for (ComponentMask m = 0; m < (ComponentMask{1} << p.size()); ++m) {
    double q = 1;
    for (std::size_t k = 0; k < p.size(); ++k) q *= (m >> k) & 1U ? p[k] : 1 - p[k];
    if (q >= t) out.insert(m);
  }
  return out;
}

const std::map<ComponentMask, double> table_one = {{5, 3.17}, {9, 3.44}, {1, 1.68}, {4, 2.17}, {8, 2.52}, {16, 3.35}};
const Masks six = {1, 4, 8, 16, 5, 9};
const Masks critical_three = {1, 5, 9};

ComponentMask bits(std::initializer_list<int> members) {
  ComponentMask m = 0;
  for (int c : members) m |= component_bit(static_cast<std::size_t>(c - 1));
  return m;
}

void criterion1(Outcome& o) {
  const auto r = run_pipeline(load_config(source("configs/daniels2.json")));
  if (masks(r.screening.noteworthy) != six) o.fail("noteworthy " + show(masks(r.screening.noteworthy), 5));
  for (const auto& row : r.rows) {
    const auto it = table_one.find(row.scenario.failed);
    if (it == table_one.end()) continue;
    if (std::fabs(row.indices.beta.value - it->second) > 0.05) {
      o.fail("beta {" + row.scenario.label() + "} = " + std::to_string(row.indices.beta.value));
    }
  }
  if (masks(r.critical) != critical_three) o.fail("critical " + show(masks(r.critical), 5));
  const double t = r.times.screening_seconds + r.times.estimation_seconds;
  if (t > 120) o.fail("runtime " + std::to_string(t) + " s");
  o.why << " noteworthy 6, critical " << show(masks(r.critical), 5);
}

void criterion2(Outcome& o) {
  const auto cfg = load_config(source("configs/daniels2.json"));
  const auto model = cfg.build_model();
  const auto rm = cfg.build_random_model();
  std::size_t lo = 99, hi = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto rep = nball_screen(*model, rm, cfg.threshold, 10000, 1.0, seed);
    const auto got = masks(rep.noteworthy);
    lo = std::min(lo, got.size());
    hi = std::max(hi, got.size());
    if (!contains_all(got, six)) o.fail("seed " + std::to_string(seed) + ": " + show(got, 5));
    if (rep.n_model_calls != 10000) o.fail("calls");
  }
  o.why << " counts " << lo << ".." << hi << " over 20 seeds";
}

void criterion3(Outcome& o) {
  auto cfg = load_config(source("configs/daniels2.json"));
  const auto model = cfg.build_model();
  const auto rm = cfg.build_random_model();
  const auto engine = make_engine(cfg.engine, rm.dim());
  AdaptiveConfig a = cfg.screening.adaptive;
  a.n_rings = 35;
  int recovered = 0;
  std::size_t worst_calls = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    a.seed = seed;
    ScreeningReport rep;
    try {
      rep = surrogate_adaptive_screen(*model, rm, cfg.threshold, a);
    } catch (const AdaptiveConvergenceError& e) {
      o.fail("seed " + std::to_string(seed) + " did not converge");
      continue;
    }
    worst_calls = std::max(worst_calls, rep.n_model_calls);
    if (rep.n_model_calls > 120) o.fail("seed " + std::to_string(seed) + " used " + std::to_string(rep.n_model_calls));
    const auto got = masks(rep.noteworthy);
    if (contains_all(got, critical_three)) {
      ++recovered;
    } else {
      o.fail("seed " + std::to_string(seed) + ": " + show(got, 5));
    }
    const auto est = estimate_scenario_indices(*model, rm, rep.noteworthy, cfg.threshold, *engine, seed);
    for (const auto& row : est.rows) {
      const auto it = table_one.find(row.scenario.failed);
      if (it != table_one.end() && std::fabs(row.indices.beta.value - it->second) > 0.05) {
        o.fail("beta {" + row.scenario.label() + "}");
      }
    }
  }
  o.why << " critical-3 in " << recovered << "/20, max calls " << worst_calls;
}

void criterion4(Outcome& o) {
  const auto cfg = load_config(source("configs/daniels1.json"));
  const auto model = cfg.build_model();
  const auto rm = cfg.build_random_model();
  const auto p = daniels_bar_probabilities(std::get<DanielsConfig>(cfg.model), cfg.marginals);
  const std::vector<std::pair<double, std::size_t>> ref = {{1e-2, 7},  {1e-3, 7},  {1e-4, 22},
                                                           {1e-5, 42}, {1e-6, 42}, {1e-7, 57}};
  const std::set<double> exact = {1e-2, 1e-4, 1e-5, 1e-7};
  const auto engine = make_engine(cfg.screening.engine, rm.dim());
  const auto t0 = std::chrono::steady_clock::now();
  for (auto [t, n] : ref) {
    const auto oracle = brute_force(p, t);
    if (oracle.size() != n) o.fail("oracle count at " + std::to_string(t));
    const auto rep = sequential_search(*model, rm, ResilienceThreshold::direct(t), *engine, 1, cfg.screening.sequential);
    const auto got = masks(rep.noteworthy);
    if (!contains_all(got, oracle)) o.fail("missed reference scenarios at " + std::to_string(t));
    if (exact.count(t) && got.size() != n) o.fail("count " + std::to_string(got.size()) + " at " + std::to_string(t));
    o.why << " " << t << ":" << got.size() << "(" << n << ")";
  }
  if (elapsed(t0) > 600) o.fail("runtime");
}

void criterion5(Outcome& o) {
  const auto cfg = load_config(source("configs/bridge25.json"));
  if (cfg.engine.type != "ce-ais-vmfm") o.fail("engine " + cfg.engine.type);
  const auto r = run_pipeline(cfg);
  const std::vector<std::pair<ComponentMask, double>> table = {
      {bits({1}), 3.40},    {bits({2}), 3.36},    {bits({3}), 3.47},    {bits({8}), 3.89},
      {bits({9}), 2.64},    {bits({1, 2}), 4.07}, {bits({1, 3}), 4.17}, {bits({1, 9}), 3.56},
      {bits({2, 3}), 4.07}, {bits({2, 9}), 3.52}, {bits({3, 9}), 3.62}, {bits({1, 2, 9}), 3.89}};
  Masks want;
  for (const auto& [m, b] : table) want.insert(m);
  const Masks want_critical = {bits({1}), bits({2}), bits({3}), bits({9}), bits({1, 9}), bits({2, 9})};
  const auto got = masks(r.screening.noteworthy);
  if (got != want) o.fail("noteworthy " + std::to_string(got.size()) + ": " + show(got, 25));
  for (const auto& [m, b] : table) {
    const auto it = std::find_if(r.rows.begin(), r.rows.end(), [m = m](const auto& x) { return x.scenario.failed == m; });
    if (it != r.rows.end() && std::fabs(it->indices.beta.value - b) > 0.1) {
      o.fail("beta {" + it->scenario.label() + "} = " + std::to_string(it->indices.beta.value) + " vs " +
             std::to_string(b));
    }
  }
  if (masks(r.critical) != want_critical) o.fail("critical " + show(masks(r.critical), 25));
  o.why << " calls " << r.total_calls;
}

void criterion6(Outcome& o) {
  const auto cfg = load_config(source("configs/building6.json"));
  const auto r = run_pipeline(cfg);
  const auto critical = masks(r.critical);
  if (critical.size() != 6) o.fail(std::to_string(critical.size()) + " critical: " + show(critical, 6));
  const auto null_row = std::find_if(r.rows.begin(), r.rows.end(), [](const auto& x) { return x.scenario.failed == 0; });
  if (null_row == r.rows.end()) {
    o.fail("null scenario not estimated");
  } else {
    o.why << " null beta " << null_row->indices.beta.value;
    if (std::fabs(null_row->indices.beta.value + 2.51) > 0.1) o.fail("null beta");
  }
  const double calls = static_cast<double>(r.total_calls);
  o.why << ", total calls " << r.total_calls;
  if (std::fabs(calls - 3e4) > 0.25 * 3e4) o.fail("total calls");

  const auto model = cfg.build_model();
  const auto rm = cfg.build_random_model();
  std::size_t lo = 99, hi = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto rep = nball_screen(*model, rm, cfg.threshold, 10000, 1.05, seed, true);
    const auto got = masks(rep.noteworthy);
    lo = std::min(lo, got.size());
    hi = std::max(hi, got.size());
    if (!contains_all(got, critical)) o.fail("seed " + std::to_string(seed) + " misses a critical scenario");
  }
  if (lo < 7 || hi > 9) o.fail("n-ball counts " + std::to_string(lo) + ".." + std::to_string(hi));
  o.why << ", n-ball counts " << lo << ".." << hi << " over 100 seeds";
}

void criterion7(Outcome& o) {
  const auto cfg = load_config(source("configs/frame3.json"));
  const auto model = cfg.build_model();
  const auto rm = cfg.build_random_model();
  const auto reference = masks(sequential_search(*model, rm, cfg.threshold, McsEngine(McsOptions{1000000, false}), 1).noteworthy);
  // brute-force census: every pattern whose probability clears the threshold is covered
  const std::size_t n_census = 2000000;
  const auto census = mcs_pattern_census(*model, rm, n_census, 77);
  Masks oracle;
  for (std::size_t m = 1; m < census.occurrences.size(); ++m) {
    if (census.occurrences[m] >= n_census * cfg.threshold.p_threshold()) oracle.insert(m);
  }
  if (!contains_all(reference, oracle)) o.fail("sequential " + show(reference, 3) + " vs census " + show(oracle, 3));
  double nball_calls = 0, adaptive_calls = 0;
  int agree = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto nb = nball_screen(*model, rm, cfg.threshold, 10000, cfg.screening.adaptive.radius_factor, seed);
    AdaptiveConfig a = cfg.screening.adaptive;
    a.seed = seed;
    ScreeningReport ad;
    try {
      ad = surrogate_adaptive_screen(*model, rm, cfg.threshold, a);
    } catch (const AdaptiveConvergenceError&) {
      o.fail("adaptive seed " + std::to_string(seed) + " did not converge");
      continue;
    }
    nball_calls += static_cast<double>(nb.n_model_calls);
    adaptive_calls += static_cast<double>(ad.n_model_calls);
    if (masks(nb.noteworthy) == reference && masks(ad.noteworthy) == reference) {
      ++agree;
    } else {
      o.fail("seed " + std::to_string(seed) + ": n-ball " + show(masks(nb.noteworthy), 3) + ", adaptive " +
             show(masks(ad.noteworthy), 3));
    }
  }
  const double ratio = adaptive_calls > 0 ? nball_calls / adaptive_calls : 0.0;
  if (ratio < 50) o.fail("call ratio " + std::to_string(ratio));
  o.why << " set " << show(reference, 3) << ", agreement " << agree << "/20, n-ball/adaptive calls " << ratio;
}

void criterion8(Outcome& o) {
  const double a = static_cast<double>(required_mcs_samples(1e-4, 0.05));
  const double b = static_cast<double>(required_mcs_samples(1e-5, 0.05));
  if (a < 3.9e6 || a > 4.0e6) o.fail("1e-4: " + std::to_string(a));
  if (std::fabs(b - 4e7) > 0.01 * 4e7) o.fail("1e-5: " + std::to_string(b));
  o.why << " " << a << ", " << b;
}

void criterion9(Outcome& o) {
  // MECE census conservation
  {
    const auto cfg = load_config(source("configs/daniels2.json"));
    const auto census = mcs_pattern_census(*cfg.build_model(), cfg.build_random_model(), 5000, 3);
    std::size_t total = 0;
    for (auto v : census.occurrences) total += v;
    if (total != 5000 || census.occurrences.size() != 32) o.fail("census");
  }
  // combined index dominates both and matches the product form
  {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> u(-4.0, 8.0);
    for (int i = 0; i < 20000; ++i) {
      const double b = u(g), p = u(g);
      const double c = combined_index(b, p);
      const double direct = -std_normal_inv_cdf(prob_from_beta(b) * prob_from_beta(p));
      if (c < std::max(b, p) - 1e-12 || std::fabs(c - direct) > 1e-8 * std::max(1.0, std::fabs(direct))) {
        o.fail("combined index");
        break;
      }
    }
  }
  // radius law of uniform n-ball samples, KS at the 1% level
  for (std::size_t d : {2u, 5u, 12u}) {
    const std::size_t n = 100000;
    const auto X = sample_nball({d, 2.5, n}, 40 + d);
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = X.row(static_cast<Eigen::Index>(i)).norm() / 2.5;
    std::sort(r.begin(), r.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double F = std::pow(r[i], static_cast<double>(d));
      ks = std::max({ks, std::fabs(F - double(i) / n), std::fabs(F - double(i + 1) / n)});
    }
    if (ks > 1.63 / std::sqrt(double(n))) o.fail("radius law d=" + std::to_string(d));
  }
  // Phi / Phi^-1 round trip
  {
    std::mt19937_64 g(7);
    std::uniform_real_distribution<double> e(-12.0, 0.0);
    for (int i = 0; i < 5000; ++i) {
      double p = std::pow(10.0, e(g));
      if (i % 2) p = 1.0 - p;
      p = std::clamp(p, 1e-12, 1.0 - 1e-12);
      if (std::fabs(std_normal_cdf(std_normal_inv_cdf(p)) - p) > 1e-10 * std::max(1.0, p)) {
        o.fail("normal round trip");
        break;
      }
    }
  }
  // Nataf round trip on the bridge's correlated inputs
  {
    const auto rm = load_config(source("configs/bridge25.json")).build_random_model();
    Rng rng(5);
    std::vector<double> u(rm.dim());
    for (int i = 0; i < 500; ++i) {
      for (auto& v : u) v = 2 * rng.normal();
      const auto back = rm.to_standard(rm.to_physical(u));
      for (std::size_t k = 0; k < u.size(); ++k) {
        if (std::fabs(back[k] - u[k]) > 1e-8) {
          o.fail("nataf round trip");
          i = 500;
          break;
        }
      }
    }
  }
  // cascade monotonicity: the trace only adds intact components, once each
  for (const char* name : {"daniels2", "building6", "frame3"}) {
    const auto cfg = load_config(source(std::string("configs/") + name + ".json"));
    const auto model = cfg.build_model();
    const auto rm = cfg.build_random_model();
    Rng rng(3);
    std::vector<double> u(rm.dim()), x(rm.dim());
    for (int i = 0; i < 3000; ++i) {
      for (auto& v : u) v = 1.5 * rng.normal();
      rm.to_physical(u, x);
      const auto out = model->evaluate(x);
      std::set<std::size_t> seen;
      for (auto k : out.cascade_trace) {
        if (out.initial_pattern.has_failed(k) || !seen.insert(k).second) {
          o.fail(std::string("cascade ") + name);
          i = 3000;
          break;
        }
      }
    }
  }
  // surrogate gradient against central differences
  {
    SurrogateNet net(3, {4, 3}, 2, 5);
    Rng rng(6);
    Eigen::MatrixXd X(7, 3), T(7, 2);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = 2 * rng.normal();
    for (Eigen::Index i = 0; i < T.size(); ++i) T.data()[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    auto p = net.parameters();
    for (std::size_t k = 0; k < 6; ++k) p[k] += 0.3 * rng.normal();
    net.set_parameters(p);
    SurrogateNet::Gradients g;
    net.batch_loss(X, T, &g);
    const auto analytic = SurrogateNet::flatten(g);
    double worst = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      auto q = p;
      q[k] = p[k] + 1e-6;
      net.set_parameters(q);
      const double up = net.batch_loss(X, T, nullptr);
      q[k] = p[k] - 1e-6;
      net.set_parameters(q);
      const double dn = net.batch_loss(X, T, nullptr);
      const double fd = (up - dn) / 2e-6;
      worst = std::max(worst, std::fabs(fd - analytic[k]) / std::max(1.0, std::fabs(fd)));
    }
    if (worst > 1e-5) o.fail("gradient error " + std::to_string(worst));
  }
  // conservative coverage of sequential search on both Daniels systems
  for (const char* name : {"daniels2", "daniels1"}) {
    const auto cfg = load_config(source(std::string("configs/") + name + ".json"));
    const auto model = cfg.build_model();
    const auto rm = cfg.build_random_model();
    const auto p = daniels_bar_probabilities(std::get<DanielsConfig>(cfg.model), cfg.marginals);
    for (double t : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7}) {
      SequentialOptions opt;
      opt.include_null = true;
      const auto rep = sequential_search(*model, rm, ResilienceThreshold::direct(t), AnalyticEngine(), 1, opt);
      if (!contains_all(masks(rep.noteworthy), brute_force(p, t))) o.fail(std::string("coverage ") + name);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<std::pair<std::string, void (*)(Outcome&)>> all = {
      {"double-layer Daniels, sequential search", criterion1},
      {"double-layer Daniels, n-ball", criterion2},
      {"double-layer Daniels, surrogate-adaptive", criterion3},
      {"single-layer Daniels threshold sweep", criterion4},
      {"truss bridge, sequential search with vMFM", criterion5},
      {"truss building, n-ball and subset simulation", criterion6},
      {"3-story frame, method agreement", criterion7},
      {"MCS sample budget", criterion8},
      {"property suites", criterion9}};
  for (std::size_t i = 0; i < all.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (only.empty() || only.count(id)) report(id, all[i].first, all[i].second);
  }
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
