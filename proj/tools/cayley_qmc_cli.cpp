// cayley-qmc: boundary solutions, orbits, verification suites, expectations
// and free-energy curves for the XY-model Markov chain on the binary tree.
//
// Exit codes: 0 all checks pass, 1 a check failed, 2 usage or input error,
// 3 the request exceeds what the chosen engine can evaluate.

#include <array>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cayley_qmc/cayley_qmc.hpp"
#include "cayley_qmc/io.hpp"

using namespace cayley_qmc;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kUsage = 2, kFeasibility = 3 };

bool quiet = false;

void log(const std::string& msg) {
  if (!quiet) std::cerr << "[cayley-qmc] " << msg << '\n';
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --------------------------------------------------------------------------
// Shared options

struct BetaGrid {
  std::optional<double> beta;
  std::optional<double> min, max;
  int steps = 0;

  std::vector<double> values() const {
    if (beta && (min || max)) throw UsageError("give either --beta or --beta-min/--beta-max, not both");
    std::vector<double> out;
    if (beta) {
      out.push_back(*beta);
    } else if (min && max) {
      if (steps < 1) throw UsageError("--beta-steps must be >= 1");
      if (*max < *min) throw UsageError("--beta-max must be >= --beta-min");
      for (int i = 0; i < steps; ++i) out.push_back(steps == 1 ? *min : *min + (*max - *min) * i / (steps - 1));
    } else {
      throw UsageError("a beta value (--beta) or grid (--beta-min, --beta-max, --beta-steps) is required");
    }
    for (double b : out) {
      if (!(b > 0.0) || !std::isfinite(b)) throw UsageError("beta must be positive and finite");
    }
    return out;
  }
};

void add_beta_options(CLI::App* cmd, BetaGrid& g, bool grid) {
  cmd->add_option("--beta", g.beta, "Inverse temperature");
  if (grid) {
    cmd->add_option("--beta-min", g.min, "Grid start");
    cmd->add_option("--beta-max", g.max, "Grid end");
    cmd->add_option("--beta-steps", g.steps, "Number of grid points")->default_val(11);
  }
}

/// "auto" is the fixed-point value 1/cosh^4(beta).
double resolve_alpha(const std::string& text, double beta) {
  if (text == "auto") return alpha_fixed(beta);
  double a = 0.0;
  try {
    std::size_t used = 0;
    a = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw UsageError("--alpha must be a positive number or \"auto\"");
  }
  if (!(a > 0.0) || !std::isfinite(a)) throw UsageError("--alpha must be positive");
  return a;
}

void require_tol(double tol, const char* name) {
  if (!(tol > 0.0)) throw UsageError(std::string(name) + " must be positive");
}

/// Runs f(i) for i < count on a small pool; results come back in index order.
template <typename T>
std::vector<T> parallel_map(std::size_t count, unsigned threads, const std::function<T(std::size_t)>& f) {
  std::vector<std::optional<T>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i] = f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned n = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(count, 1)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<T> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

void emit(const json& j) {
  if (!io::all_finite(j)) throw std::runtime_error("refusing to emit a non-finite number");
  std::cout << j.dump(2) << '\n';
}

ProductObservable random_observable(std::mt19937_64& rng, int level, int terms) {
  const auto sites = ball(level, kBinary);
  std::bernoulli_distribution keep(0.6);
  std::normal_distribution<double> g;
  ProductObservable obs;
  for (int t = 0; t < terms; ++t) {
    ProductTerm term{Complex(g(rng), g(rng)), {}};
    for (const auto& x : sites) {
      if (!keep(rng)) continue;
      Matrix2 m;
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) m(r, c) = Complex(g(rng), g(rng));
      }
      term.factors[x] = m;
    }
    obs.add(std::move(term));
  }
  return obs;
}

// --------------------------------------------------------------------------
// solve-boundary

struct SolveOptions {
  BetaGrid beta;
  std::string alpha = "auto";
  int levels = 4;
  double tol = 1e-12;
  unsigned threads = 0;
};

json solve_one(double beta, const SolveOptions& o, bool& pass) {
  const double alpha = resolve_alpha(o.alpha, beta);
  const auto bc = solution_family(alpha, beta, o.levels);
  const auto r = boundary_residuals(bc, beta, o.levels);
  json h = json::array();
  for (const auto& m : bc.h_levels()) h.push_back(io::matrix_to_json(m));
  pass = r.eq1 <= o.tol && r.max_eq2() <= o.tol;
  return {{"alpha", alpha},         {"beta", beta},          {"w0", io::matrix_to_json(bc.w0())},
          {"h_levels", h},          {"eq1_residual", r.eq1}, {"eq2_residual_per_level", r.eq2},
          {"pass", pass}};
}

int cmd_solve_boundary(const SolveOptions& o) {
  require_tol(o.tol, "--tol");
  if (o.levels < 1) throw UsageError("--levels must be >= 1");
  const auto betas = o.beta.values();
  for (double b : betas) resolve_alpha(o.alpha, b);
  log("solving boundary family on " + std::to_string(betas.size()) + " beta value(s)");
  auto rows = parallel_map<std::pair<json, bool>>(betas.size(), o.threads, [&](std::size_t i) {
    bool pass = false;
    json j = solve_one(betas[i], o, pass);
    return std::make_pair(std::move(j), pass);
  });
  bool all = true;
  json out = json::array();
  for (auto& [j, p] : rows) {
    all = all && p;
    out.push_back(std::move(j));
  }
  emit(betas.size() == 1 ? out[0] : out);
  return all ? kOk : kCheckFailed;
}

// --------------------------------------------------------------------------
// orbit

struct OrbitOptions {
  BetaGrid beta;
  double x0 = 1.0, y0 = 0.0;
  int max_steps = 200;
  std::string out = "csv";
};

int cmd_orbit(const OrbitOptions& o) {
  const double beta = o.beta.values().at(0);
  if (o.max_steps < 1) throw UsageError("--max-steps must be >= 1");
  const BoundaryPoint p0{o.x0, o.y0};
  if (!p0.in_domain() || !std::isfinite(o.x0)) throw UsageError("start point must satisfy x0 > y0 >= 0");
  const auto orb = orbit(p0, beta, o.max_steps);
  log(std::string("orbit terminated: ") + to_string(orb.termination) + " after " + std::to_string(orb.final_step) +
      " step(s)");
  if (o.out == "json") {
    json pts = json::array();
    for (std::size_t i = 0; i < orb.points.size(); ++i) {
      pts.push_back({{"step", i}, {"x", orb.points[i].x}, {"y", orb.points[i].y}, {"admissible", orb.admissible(i)}});
    }
    emit({{"beta", beta}, {"points", pts}, {"termination", to_string(orb.termination)}, {"final_step", orb.final_step}});
  } else {
    std::cout << io::orbit_csv(orb);
  }
  return kOk;
}

// --------------------------------------------------------------------------
// verify

struct VerifyOptions {
  std::string suite;
  BetaGrid beta;
  std::string alpha = "auto";
  int n = 2;
  double tol = 1e-10;     // functional residuals
  double op_tol = 1e-12;  // operator residuals
  std::uint64_t seed = 1;
  int samples = 1000;
  unsigned threads = 0;
};

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool at_most = true;  // value <= threshold, else value > threshold

  bool pass() const { return at_most ? value <= threshold : value > threshold; }
  json to_json() const {
    return {{"name", name}, {"value", value}, {at_most ? "max" : "min_exclusive", threshold}, {"pass", pass()}};
  }
};

std::vector<Check> suite_model(double /*beta*/, const VerifyOptions& o) {
  std::vector<double> grid{0.1};
  for (int i = 1; i <= 12; ++i) grid.push_back(0.25 * i);
  const auto r = verify_power_identities(6, grid);
  return {{"even_power_residual", r.max_even_residual, o.op_tol},
          {"odd_power_residual", r.max_odd_residual, o.op_tol},
          {"square_projector_residual", r.square_projector_residual, o.op_tol},
          {"closed_form_vs_expm", r.max_closed_form_residual, o.op_tol}};
}

std::vector<Check> suite_boundary(double beta, const VerifyOptions& o) {
  std::vector<Check> out;
  const auto fp = fixed_point(beta);
  const auto up = pullup(fp, beta);
  out.push_back({"fixed_point_pullup", is_admissible(up) ? point_distance(std::get<BoundaryPoint>(up), fp) : 1e300, 1e-14});
  out.push_back({"fixed_point_pushdown", point_distance(pushdown(fp, beta), fp), 1e-14});

  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> logx(std::log(1e-3), std::log(1e2)), u(0.0, 1.0);
  double roundtrip = 0.0, ratio_fail = 0.0, max_steps = 0.0;
  for (int i = 0; i < o.samples; ++i) {
    const double x = std::exp(logx(rng));
    double r = u(rng);
    while (r == 0.0) r = u(rng);
    const BoundaryPoint p{x, x * r};
    const auto q = pullup(p, beta);
    if (is_admissible(q)) {
      const auto back = pushdown(std::get<BoundaryPoint>(q), beta);
      roundtrip = std::max(roundtrip, point_distance(back, p) / p.x);
      if (!ratio_contraction_check(p, beta)) ratio_fail += 1.0;
    }
    if (orbit(p, beta, 200).termination == Termination::MaxSteps) max_steps += 1.0;
  }
  out.push_back({"inverse_pair_relative", roundtrip, o.op_tol});
  out.push_back({"ratio_contraction_failures", ratio_fail, 0.0});
  out.push_back({"offdiagonal_orbits_reaching_max_steps", max_steps, 0.0});

  double diag = 0.0;
  for (double x0 : {1e-3, 0.1, 1.0, 10.0, 100.0}) {
    const auto orb = orbit({x0, 0.0}, beta, 20, 0.0);
    for (std::size_t n = 0; n < orb.points.size(); ++n) {
      const double c = diagonal_orbit_closed_form(x0, beta, static_cast<int>(n));
      diag = std::max(diag, std::abs(orb.points[n].x - c) / c);
    }
  }
  out.push_back({"diagonal_closed_form_relative", diag, o.tol});

  const auto bc = solution_family(resolve_alpha(o.alpha, beta), beta, 6);
  const auto res = boundary_residuals(bc, beta, 6);
  out.push_back({"family_eq1", res.eq1, o.op_tol});
  out.push_back({"family_eq2", res.max_eq2(), o.op_tol});

  const auto search = periodic_point_search(beta, 8, std::min(o.samples, 1000), o.seed);
  out.push_back({"periodic_hits", static_cast<double>(search.hits.size()), 0.0});
  return out;
}

std::vector<Check> suite_compat(double beta, const VerifyOptions& o) {
  std::vector<Check> out;
  double proj = 0.0;
  for (double alpha : {alpha_fixed(beta), resolve_alpha(o.alpha, beta), 1.0}) {
    const auto bc = solution_family(alpha, beta, 3);
    const auto w2 = build_density(2, beta, bc).density;
    const auto w1 = build_density(1, beta, bc).density;
    proj = std::max(proj, distance(normalized_partial_trace(w2, ball(1, kBinary)), w1));
  }
  out.push_back({"projectivity_dense", proj, o.op_tol});

  std::mt19937_64 rng(o.seed);
  const auto bc = solution_family(resolve_alpha(o.alpha, beta), beta, 7);
  double compat = 0.0, engines = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto obs = random_observable(rng, 1, 2);
    const Complex base = expectation_transfer(obs, 1, beta, bc);
    for (int n : {2, 3, 6}) compat = std::max(compat, std::abs(expectation_transfer(obs, n, beta, bc) - base));
    engines = std::max(engines, std::abs(expectation_dense(obs, 1, beta, bc) - base));
  }
  out.push_back({"functional_compatibility", compat, o.tol});
  out.push_back({"dense_vs_transfer", engines, o.tol});
  return out;
}

std::vector<Check> suite_uniqueness(double beta, const VerifyOptions& o) {
  if (o.n < 0 || o.n > kMaxTransferLevel - 1) throw UsageError("--n out of range for the transfer engine");
  std::mt19937_64 rng(o.seed);
  std::vector<ProductObservable> obs;
  for (int i = 0; i < 20; ++i) obs.push_back(random_observable(rng, o.n, 2));
  const auto rep = uniqueness_check({0.3, 1.0, alpha_fixed(beta), 5.0}, obs, o.n, beta);
  return {{"alpha_deviation", rep.max_deviation, o.tol}};
}

std::vector<Check> suite_appendix(double /*beta*/, const VerifyOptions& o) {
  double min_p = 1e300;
  for (int i = 1; i <= 10000; ++i) min_p = std::min(min_p, appendix_polynomial(1.0 + 99.0 * i / 10000.0));
  double lemma_fail = 0.0, substitution = 0.0, min_term = 1e300;
  for (int i = 1; i <= 1000; ++i) {
    const double b = 0.01 * i;
    if (!lemma_inequality(b).holds) lemma_fail += 1.0;
    const double c = std::cosh(b), s = std::sinh(b);
    substitution = std::max(substitution, std::abs(appendix_substitution(b) - (c * c * c - s * (1.0 + c))) / (c * c * c));
  }
  for (int i = 1; i <= 4000; ++i) {
    for (double t : appendix_case(1.0 + 5.0 * i / 4000.0).terms) min_term = std::min(min_term, t);
  }
  return {{"min_p_on_(1,100]", min_p, 0.0, false},
          {"p(1)-8", std::abs(appendix_polynomial(1.0) - 8.0), 0.0},
          {"p(2)-17", std::abs(appendix_polynomial(2.0) - 17.0), 0.0},
          {"lemma_failures_on_(0,10]", lemma_fail, 0.0},
          {"substitution_identity_relative", substitution, o.op_tol},
          {"case_split_min_term", min_term, -1e-12, false}};
}

int cmd_verify(const VerifyOptions& o) {
  require_tol(o.tol, "--tol");
  require_tol(o.op_tol, "--op-tol");
  if (o.samples < 1) throw UsageError("--samples must be >= 1");
  using Suite = std::function<std::vector<Check>(double, const VerifyOptions&)>;
  const std::map<std::string, Suite> suites{{"model", suite_model},
                                            {"boundary", suite_boundary},
                                            {"compat", suite_compat},
                                            {"uniqueness", suite_uniqueness},
                                            {"appendix", suite_appendix}};
  const auto it = suites.find(o.suite);
  if (it == suites.end()) throw UsageError("unknown suite \"" + o.suite + "\"");
  BetaGrid grid = o.beta;
  if (!grid.beta && !grid.min && !grid.max) grid.beta = 1.0;
  const auto betas = grid.values();
  for (double b : betas) resolve_alpha(o.alpha, b);
  log("running suite " + o.suite + " on " + std::to_string(betas.size()) + " beta value(s)");

  const auto results = parallel_map<std::vector<Check>>(betas.size(), o.threads, [&](std::size_t i) {
    return it->second(betas[i], o);
  });
  bool all = true;
  json runs = json::array();
  for (std::size_t i = 0; i < betas.size(); ++i) {
    json checks = json::array();
    for (const auto& c : results[i]) {
      all = all && c.pass();
      checks.push_back(c.to_json());
      if (!c.pass()) log("check failed: " + c.name + " = " + io::format_number(c.value));
    }
    runs.push_back({{"beta", betas[i]}, {"checks", checks}});
  }
  emit({{"suite", o.suite}, {"seed", o.seed}, {"runs", runs}, {"pass", all}});
  return all ? kOk : kCheckFailed;
}

// --------------------------------------------------------------------------
// expect

struct ExpectOptions {
  BetaGrid beta;
  std::string alpha = "auto";
  int n = 1;
  std::string engine = "auto";
  std::string form = "auto";
  bool matrix_free = false;
  double tol = 1e-10;
  unsigned threads = 0;
  std::string file;
};

std::string read_input(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), {}};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read observable file \"" + path + "\"");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_expect(const ExpectOptions& o) {
  require_tol(o.tol, "--tol");
  if (o.n < 0) throw UsageError("--n must be >= 0");
  const double beta = o.beta.values().at(0);
  const double alpha = resolve_alpha(o.alpha, beta);
  const auto obs = io::parse_observable(read_input(o.file));
  const auto bc = solution_family(alpha, beta, o.n + 2);

  EvalOptions opts;
  opts.residual_tol = o.tol;
  opts.allow_matrix_free = o.matrix_free;
  opts.threads = o.threads;
  opts.form = o.form == "reduced" ? EvalForm::Reduced : o.form == "padded" ? EvalForm::Padded : EvalForm::Auto;
  const EvalForm resolved = resolve_form(bc, beta, o.n, opts);
  const auto res = boundary_residuals(bc, beta, o.n);

  auto record = [&](Engine e) {
    const FiniteVolumeState state(o.n, beta, bc, e, opts);
    log(std::string("evaluating with the ") + to_string(e) + " engine (" + to_string(resolved) + " form)");
    return io::ResultRecord{o.n, beta, alpha, to_string(e), state.expect(obs), res.eq1, res.max_eq2()};
  };

  if (o.engine == "both") {
    const auto d = record(Engine::Dense);
    const auto t = record(Engine::Transfer);
    emit({{"dense", io::to_json(d)}, {"transfer", io::to_json(t)}, {"gap", std::abs(d.value - t.value)},
          {"form", to_string(resolved)}});
    return std::abs(d.value - t.value) <= o.tol * std::max(1.0, std::abs(t.value)) ? kOk : kCheckFailed;
  }
  Engine e = Engine::Transfer;
  if (o.engine == "dense") {
    e = Engine::Dense;
  } else if (o.engine == "auto") {
    const int volume = evaluation_volume(o.n, resolved);
    e = ball_size(volume, kBinary) <= kMaxDenseSites ? Engine::Dense : Engine::Transfer;
  }
  json j = io::to_json(record(e));
  j["form"] = to_string(resolved);
  emit(j);
  return kOk;
}

// --------------------------------------------------------------------------
// free-energy

struct FreeEnergyOptions {
  BetaGrid beta;
  std::string alpha = "auto";
  int n = 20;
  std::string out = "csv";
  unsigned threads = 0;
};

int cmd_free_energy(const FreeEnergyOptions& o) {
  if (o.n < 1) throw UsageError("--n must be >= 1");
  const auto betas = o.beta.values();
  for (double b : betas) resolve_alpha(o.alpha, b);
  const auto rows = parallel_map<std::array<double, 4>>(betas.size(), o.threads, [&](std::size_t i) {
    const double b = betas[i];
    const double f = free_energy(o.n, b, resolve_alpha(o.alpha, b));
    const double lim = free_energy_limit(b);
    return std::array<double, 4>{b, f, lim, std::abs(f - lim)};
  });
  for (const auto& r : rows) {
    for (double v : r) {
      if (!std::isfinite(v)) throw std::runtime_error("non-finite free energy");
    }
  }
  if (o.out == "json") {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back({{"beta", r[0]}, {"F_n", r[1]}, {"F_limit", r[2]}, {"abs_gap", r[3]}});
    emit({{"n", o.n}, {"rows", arr}});
  } else {
    std::cout << "beta,F_n,F_limit,abs_gap\n";
    for (const auto& r : rows) {
      std::cout << io::format_number(r[0]) << ',' << io::format_number(r[1]) << ',' << io::format_number(r[2]) << ','
                << io::format_number(r[3]) << '\n';
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"XY-model quantum Markov chain on the binary Cayley tree"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("-q,--quiet", quiet, "Suppress log messages on stderr");

  SolveOptions solve;
  auto* c_solve = app.add_subcommand("solve-boundary", "Boundary family h^(n) with consistency residuals");
  add_beta_options(c_solve, solve.beta, true);
  c_solve->add_option("--alpha", solve.alpha, "Family parameter (number or auto)")->capture_default_str();
  c_solve->add_option("--levels", solve.levels, "Highest level n of h^(n)")->capture_default_str();
  c_solve->add_option("--tol", solve.tol, "Residual threshold")->capture_default_str();
  c_solve->add_option("--threads", solve.threads, "Workers for beta grids (0 = all cores)");

  OrbitOptions orb;
  auto* c_orbit = app.add_subcommand("orbit", "Iterate the pullup map and print the trajectory");
  add_beta_options(c_orbit, orb.beta, false);
  c_orbit->add_option("--x0", orb.x0, "Start diagonal entry")->capture_default_str();
  c_orbit->add_option("--y0", orb.y0, "Start off-diagonal modulus")->capture_default_str();
  c_orbit->add_option("--max-steps", orb.max_steps, "Step cap")->capture_default_str();
  c_orbit->add_option("--out", orb.out, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  VerifyOptions ver;
  auto* c_verify = app.add_subcommand("verify", "Run an invariant suite; exit 0 iff every check passes");
  c_verify->add_option("--suite", ver.suite, "model | boundary | compat | uniqueness | appendix")->required();
  add_beta_options(c_verify, ver.beta, true);
  c_verify->add_option("--alpha", ver.alpha, "Family parameter (number or auto)")->capture_default_str();
  c_verify->add_option("--n", ver.n, "Volume level for the uniqueness suite")->capture_default_str();
  c_verify->add_option("--tol", ver.tol, "Functional residual threshold")->capture_default_str();
  c_verify->add_option("--op-tol", ver.op_tol, "Operator residual threshold")->capture_default_str();
  c_verify->add_option("--seed", ver.seed, "Seed for sampled checks")->capture_default_str();
  c_verify->add_option("--samples", ver.samples, "Sample count for the boundary suite")->capture_default_str();
  c_verify->add_option("--threads", ver.threads, "Workers for beta grids (0 = all cores)");

  ExpectOptions ex;
  auto* c_expect = app.add_subcommand("expect", "Expectation of an observable file in the finite-volume state");
  c_expect->add_option("observable", ex.file, "Observable JSON file, or - for stdin")->required();
  add_beta_options(c_expect, ex.beta, false);
  c_expect->add_option("--alpha", ex.alpha, "Family parameter (number or auto)")->capture_default_str();
  c_expect->add_option("--n", ex.n, "Volume level")->capture_default_str();
  c_expect->add_option("--engine", ex.engine, "dense | transfer | auto | both")
      ->check(CLI::IsMember({"dense", "transfer", "auto", "both"}))
      ->capture_default_str();
  c_expect->add_option("--form", ex.form, "auto | reduced | padded")
      ->check(CLI::IsMember({"auto", "reduced", "padded"}))
      ->capture_default_str();
  c_expect->add_flag("--matrix-free", ex.matrix_free, "Allow the matrix-free dense oracle on Lambda_3 (slow)");
  c_expect->add_option("--tol", ex.tol, "Consistency threshold for the form choice")->capture_default_str();
  c_expect->add_option("--threads", ex.threads, "Workers for the matrix-free oracle (0 = all cores)");

  FreeEnergyOptions fe;
  auto* c_free = app.add_subcommand("free-energy", "Finite-n free energy against its limit");
  add_beta_options(c_free, fe.beta, true);
  c_free->add_option("--alpha", fe.alpha, "Family parameter (number or auto)")->capture_default_str();
  c_free->add_option("--n", fe.n, "Volume level")->capture_default_str();
  c_free->add_option("--out", fe.out, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  c_free->add_option("--threads", fe.threads, "Workers for beta grids (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (c_solve->parsed()) return cmd_solve_boundary(solve);
    if (c_orbit->parsed()) return cmd_orbit(orb);
    if (c_verify->parsed()) return cmd_verify(ver);
    if (c_expect->parsed()) return cmd_expect(ex);
    if (c_free->parsed()) return cmd_free_energy(fe);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const SiteError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const SupportError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFeasibility;
  } catch (const FeasibilityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFeasibility;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCheckFailed;
  }
  return kUsage;
}
