// rwdre: command-line entry point for every module.
//
// Exit codes: 0 success, 2 usage, 3 precondition, 4 resource guard, 5 verification
// failure (and simulation errors).

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rwdre/env.hpp"
#include "rwdre/error.hpp"
#include "rwdre/kernel.hpp"
#include "rwdre/parallel.hpp"
#include "rwdre/regen.hpp"
#include "rwdre/renorm.hpp"
#include "rwdre/rng.hpp"
#include "rwdre/slt.hpp"
#include "rwdre/stats.hpp"
#include "rwdre/walker.hpp"
#include "verify.hpp"

#ifndef RWDRE_VERSION
#define RWDRE_VERSION "0.0.0"
#endif

namespace {

using json = nlohmann::json;
using namespace rwdre;

constexpr int kSchemaVersion = 1;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;
};

struct Output {
  json result = json::object();
  std::optional<Table> table;
  std::string text;  // verify report
  int exit_code = 0;
};

struct Globals {
  std::uint64_t seed = 1;
  std::string format = "auto";
  std::string output;
  int threads = 0;
  double max_work = stats::kDefaultMaxWork;
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex(std::uint64_t x) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

std::string cell(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

// Resolved options of one subcommand: given values, else defaults.
json collect(const CLI::App* app, json into) {
  for (const CLI::Option* o : app->get_options()) {
    const std::string name = o->get_single_name();
    if (name == "help" || name.empty()) continue;
    if (o->count() > 0) {
      const auto& r = o->results();
      std::string joined;
      for (std::size_t i = 0; i < r.size(); ++i) joined += (i ? "," : "") + r[i];
      into[name] = o->get_expected_max() == 0 ? json(true) : json(joined);
    } else {
      into[name] = o->get_expected_max() == 0 ? json(false) : json(o->get_default_str());
    }
  }
  return into;
}

json big_json(const renorm::BigInt& x) {
  if (x <= renorm::BigInt(std::numeric_limits<std::int64_t>::max())) return json(x.convert_to<std::int64_t>());
  return json(x.str());
}

Table scalar_table(const json& result) {
  Table t;
  t.columns = {"key", "value"};
  for (auto it = result.begin(); it != result.end(); ++it) {
    if (it->is_object()) continue;
    if (it->is_array()) {
      std::string joined;
      for (std::size_t i = 0; i < it->size(); ++i) joined += (i ? ";" : "") + cell((*it)[i]);
      t.rows.push_back({it.key(), joined});
    } else {
      t.rows.push_back({it.key(), *it});
    }
  }
  return t;
}

void write(std::ostream& out, const std::string& command, const Globals& g, const json& config, const Output& o,
           const std::string& format) {
  const std::string cfg = config.dump();
  const std::string hash = "fnv1a64:" + hex(fnv1a(cfg));
  if (format == "json") {
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["version"] = RWDRE_VERSION;
    doc["command"] = command;
    doc["seed"] = g.seed;
    doc["config"] = config;
    doc["config_hash"] = hash;
    json result = o.result;
    if (o.table) {
      json rows = json::array();
      for (const auto& r : o.table->rows) {
        json obj;
        for (std::size_t i = 0; i < r.size(); ++i) obj[o.table->columns[i]] = r[i];
        rows.push_back(obj);
      }
      result["rows"] = rows;
    }
    doc["result"] = result;
    out << doc.dump(2) << "\n";
    return;
  }
  out << "# schema_version=" << kSchemaVersion << "\n# version=" << RWDRE_VERSION << "\n# command=" << command
      << "\n# seed=" << g.seed << "\n# config_hash=" << hash << "\n# config=" << cfg << "\n";
  if (format == "text") {
    out << o.text;
    return;
  }
  const Table t = o.table ? *o.table : scalar_table(o.result);
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << cell(r[i]);
    out << "\n";
  }
}

// ---- shared option groups

struct WalkOpts {
  double p_circ = 0.3;
  double p_bullet = 0.8;
  double rho = 1.0;
  double q = 0.5;
  walker::WalkParams params() const { return {p_circ, p_bullet}; }
};

void add_walk(CLI::App* a, WalkOpts& w) {
  a->add_option("--p-circ", w.p_circ, "P(right step) on vacant sites");
  a->add_option("--p-bullet", w.p_bullet, "P(right step) on occupied sites");
  a->add_option("--rho", w.rho, "particle density");
  a->add_option("--q", w.q, "laziness of the particles");
}

struct LadderOpts {
  renorm::LadderConfig cfg;
};

void add_ladder(CLI::App* a, LadderOpts& l) {
  a->add_option("--L0", l.cfg.L0, "initial scale");
  a->add_option("--v", l.cfg.v, "target speed");
  a->add_option("--v-bullet", l.cfg.v_bullet, "speed on occupied sites");
  a->add_option("--rho0", l.cfg.rho0, "initial density");
  a->add_option("--kmax", l.cfg.k_max, "number of scales");
}

struct SigmaOpts {
  std::int64_t lo = 0;
  std::int64_t hi = 4;
  double mu = 1.0;
  double cap = 1.0;
  std::vector<std::int64_t> sites() const { return kernel::interval_sites(lo, hi); }
};

void add_sigma(CLI::App* a, SigmaOpts& s) {
  a->add_option("--sigma-lo", s.lo, "first site of Sigma");
  a->add_option("--sigma-hi", s.hi, "last site of Sigma");
  a->add_option("--mu", s.mu, "mass of mu at every site");
  a->add_option("--cap", s.cap, "initial height cap of the point process");
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ParameterError("not a number list: " + s);
    }
  }
  return out;
}

struct Leaf {
  CLI::App* app;
  std::string name;
  std::string default_format;
  std::function<Output(const Globals&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random walk in a dynamic random environment of lazy random walks: simulation and verification"};
  app.name("rwdre");
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", RWDRE_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--format", g.format, "csv, json or auto")->check(CLI::IsMember({"auto", "csv", "json"}));
  app.add_option("--output,-o", g.output, "output file (default stdout)");
  app.add_option("--threads", g.threads, "worker threads (RWRW_THREADS overrides)")->check(CLI::NonNegativeNumber);
  app.add_option("--max-work", g.max_work, "resource guard on estimated work units");

  std::vector<Leaf> leaves;

  // kernel
  struct {
    double q = 0.5;
    int n = 2;
    bool exact = false;
    bool bounds = false;
    double c = 0.5;
  } ko;
  auto* kc = app.add_subcommand("kernel", "heat kernel p_n(0,x) of the lazy walk");
  kc->add_option("--q", ko.q, "holding probability");
  kc->add_option("--n", ko.n, "number of steps");
  kc->add_flag("--exact", ko.exact, "add the exact rational value (n <= 64)");
  kc->add_flag("--bounds", ko.bounds, "report the local, smoothness and tail constants up to n");
  kc->add_option("--c", ko.c, "tail constant for --bounds");
  leaves.push_back({kc, "kernel", "csv", [&](const Globals&) {
                      Output o;
                      if (ko.bounds) {
                        const auto r = kernel::kernel_bound_report(ko.q, ko.n, ko.c);
                        o.result = {{"q", r.q},
                                    {"n_max", r.n_max},
                                    {"c", r.c},
                                    {"C_local", r.C_local},
                                    {"C_smooth", r.C_smooth},
                                    {"C_tail", r.C_tail},
                                    {"hypotheses_ok", r.hypotheses_ok},
                                    {"local_bounded", r.local_bounded},
                                    {"smooth_bounded", r.smooth_bounded},
                                    {"tail_bounded", r.tail_bounded},
                                    {"note", r.note}};
                        Table t;
                        t.columns = {"n", "sup_scaled", "smooth_scaled", "tail", "tail_scaled"};
                        for (const auto& row : r.rows)
                          t.rows.push_back({row.n, row.sup_scaled, row.smooth_scaled, row.tail, row.tail_scaled});
                        o.table = t;
                        return o;
                      }
                      const auto k = kernel::heat_kernel(ko.q, ko.n);
                      std::vector<kernel::Rational> ex;
                      if (ko.exact) ex = kernel::heat_kernel_exact(ko.q, ko.n);
                      Table t;
                      t.columns = {"x", "p"};
                      if (ko.exact) t.columns.push_back("exact");
                      for (std::int64_t x = -ko.n; x <= ko.n; ++x) {
                        std::vector<json> row{x, k(x)};
                        if (ko.exact) row.push_back(ex[static_cast<std::size_t>(x + ko.n)].str());
                        t.rows.push_back(row);
                      }
                      o.result = {{"q", ko.q}, {"n", ko.n}, {"sum", k.sum()}};
                      o.table = t;
                      return o;
                    }});

  // env
  struct {
    double rho = 1.0;
    double q = 0.5;
    std::int64_t x_lo = -10, x_hi = 10, t_max = 20;
  } eo;
  auto* ec = app.add_subcommand("env", "occupancy counts of the particle cloud on a space-time rectangle");
  ec->add_option("--rho", eo.rho, "particle density");
  ec->add_option("--q", eo.q, "laziness of the particles");
  ec->add_option("--x-lo", eo.x_lo, "leftmost site");
  ec->add_option("--x-hi", eo.x_hi, "rightmost site");
  ec->add_option("--t-max", eo.t_max, "last time (rows 0..t-max)");
  leaves.push_back({ec, "env", "csv", [&](const Globals& gl) {
                      require(eo.x_lo <= eo.x_hi && eo.t_max >= 0, "need x-lo <= x-hi and t-max >= 0");
                      env::EnvConfig cfg;
                      cfg.rho = eo.rho;
                      cfg.q = eo.q;
                      cfg.x_min = eo.x_lo - eo.t_max;
                      cfg.x_max = eo.x_hi + eo.t_max;
                      cfg.t_min = 0;
                      cfg.t_max = eo.t_max;
                      cfg.seed = gl.seed;
                      const env::Environment e(cfg);
                      const env::OccupancyGrid grid(e, eo.x_lo, eo.x_hi, 0, eo.t_max);
                      Output o;
                      Table t;
                      t.columns = {"n", "x", "count"};
                      std::int64_t total = 0;
                      for (std::int64_t n = 0; n <= eo.t_max; ++n)
                        for (std::int64_t x = eo.x_lo; x <= eo.x_hi; ++x) {
                          const int c = grid.count(x, n);
                          total += c;
                          t.rows.push_back({n, x, c});
                        }
                      const double cells = static_cast<double>((eo.x_hi - eo.x_lo + 1) * (eo.t_max + 1));
                      o.result = {{"mean_count", static_cast<double>(total) / cells}, {"rho", eo.rho}};
                      o.table = t;
                      return o;
                    }});

  // walk
  WalkOpts wo;
  std::int64_t walk_n = 1000;
  auto* wc = app.add_subcommand("walk", "one walker path X_0..X_n");
  add_walk(wc, wo);
  wc->add_option("--n", walk_n, "steps");
  leaves.push_back({wc, "walk", "csv", [&](const Globals& gl) {
                      const env::Environment e(walker::walk_window(wo.rho, wo.q, walk_n, 0, hash_keys(gl.seed, {0})));
                      const env::WalkCursor cur(e);
                      const auto path = walker::run_walk(cur, walker::UniformField(hash_keys(gl.seed, {1})),
                                                         wo.params(), {0, 0}, walk_n);
                      Output o;
                      Table t;
                      t.columns = {"n", "x"};
                      for (std::int64_t i = 0; i <= path.steps(); ++i) t.rows.push_back({i, path.x[i]});
                      o.result = {{"X_n", path.x.back()},
                                  {"speed", static_cast<double>(path.x.back()) / static_cast<double>(std::max<std::int64_t>(1, walk_n))}};
                      o.table = t;
                      return o;
                    }});

  // regen
  WalkOpts ro{0.7, 0.9, 1.0, 0.5};
  regen::RegenConfig rc_cfg;
  std::int64_t regen_horizon = 20000;
  int regen_count = 1;
  auto* rc = app.add_subcommand("regen", "regeneration times of one walk");
  add_walk(rc, ro);
  rc->add_option("--v-star", rc_cfg.v_star, "ballisticity speed");
  rc->add_option("--T", rc_cfg.T, "good-record scale");
  rc->add_option("--cert-tol", rc_cfg.cert_tol, "certificate tolerance");
  rc->add_option("--horizon", regen_horizon, "search horizon per regeneration");
  rc->add_option("--count", regen_count, "number of regenerations");
  leaves.push_back({rc, "regen", "csv", [&](const Globals& gl) {
                      require(regen_count >= 1 && regen_horizon >= 0, "count >= 1 and horizon >= 0");
                      const env::Environment e(
                          regen::regen_window(ro.rho, ro.q, regen_horizon * regen_count, hash_keys(gl.seed, {0})));
                      const auto seq = regen::regen_sequence(e, walker::UniformField(hash_keys(gl.seed, {1})),
                                                             ro.params(), rc_cfg, {0, 0}, regen_horizon, regen_count);
                      const auto d = regen::derive(rc_cfg, ro.params());
                      Output o;
                      Table t;
                      t.columns = {"j", "tau", "x", "dt", "dx", "certified", "residual", "seed"};
                      for (std::size_t j = 0; j < seq.segments.size(); ++j) {
                        const auto& s = seq.segments[j];
                        t.rows.push_back({j + 1, s.tau, s.x, s.dt, s.dx, s.certified, s.residual, gl.seed});
                      }
                      o.result = {{"complete", seq.complete},
                                  {"found", seq.segments.size()},
                                  {"v_bar", d.v_bar},
                                  {"T_prime", d.T_prime},
                                  {"T_dprime", d.T_dprime}};
                      o.table = t;
                      return o;
                    }});

  // renorm
  auto* rn = app.add_subcommand("renorm", "multiscale renormalisation");
  rn->require_subcommand(1);
  LadderOpts lo;
  auto* rl = rn->add_subcommand("ladder", "scales L_k, speeds v_k and densities rho_k");
  add_ladder(rl, lo);
  leaves.push_back({rl, "renorm ladder", "json", [&](const Globals&) {
                      const auto lad = renorm::build_ladder(lo.cfg);
                      const auto k0 = renorm::k0_threshold(lad.delta, lad);
                      json L = json::array(), v = json::array();
                      for (const auto& x : lad.L) L.push_back(big_json(x));
                      for (std::size_t k = 1; k < lad.v_k.size(); ++k) v.push_back(lad.v_k[k]);
                      Output o;
                      o.result = {{"L", L},
                                  {"log_L", lad.logL},
                                  {"v_k", v},
                                  {"rho", lad.rho},
                                  {"rho_star", lad.rho_star},
                                  {"delta", lad.delta},
                                  {"v_limit_residual", renorm::v_limit_residual(lad)},
                                  {"k0", k0.k0},
                                  {"k0_in_range", k0.in_range}};
                      return o;
                    }});

  LadderOpts po;
  WalkOpts pw{0.15, 0.9, 1.0, 0.5};
  int pk_k = 0, pk_reps = 200;
  double max_site_steps = renorm::kDefaultMaxSiteSteps;
  auto* rp = rn->add_subcommand("pk", "Monte Carlo estimate of p_k");
  add_ladder(rp, po);
  rp->add_option("--k", pk_k, "scale index");
  rp->add_option("--p-circ", pw.p_circ, "P(right step) on vacant sites");
  rp->add_option("--p-bullet", pw.p_bullet, "P(right step) on occupied sites");
  rp->add_option("--q", pw.q, "laziness of the particles");
  rp->add_option("--replicas", pk_reps, "replicas");
  rp->add_option("--max-site-steps", max_site_steps, "resource guard");
  leaves.push_back({rp, "renorm pk", "json", [&](const Globals& gl) {
                      const auto lad = renorm::build_ladder(po.cfg);
                      const auto p = renorm::pk_estimate(lad, pk_k, pw.q, pw.params(), pk_reps, gl.seed, max_site_steps);
                      Output o;
                      o.result = {{"k", pk_k},       {"L", p.L},         {"v", p.v},         {"replicas", p.replicas},
                                  {"hits", p.hits},  {"p_hat", p.p_hat}, {"ci_lo", p.ci_lo}, {"ci_hi", p.ci_hi}};
                      return o;
                    }});

  LadderOpts co;
  co.cfg.L0 = 16;
  co.cfg.v = -0.9;
  co.cfg.v_bullet = 0.8;
  co.cfg.k_max = 4;
  WalkOpts cw{0.15, 0.9, 0.1, 0.5};
  int claim_k = 1, claim_reps = 32;
  auto* rcl = rn->add_subcommand("claim", "three-slow-boxes claim on simulated boxes");
  add_ladder(rcl, co);
  add_walk(rcl, cw);
  rcl->add_option("--k", claim_k, "scale index");
  rcl->add_option("--replicas", claim_reps, "replicas");
  rcl->add_option("--max-site-steps", max_site_steps, "resource guard");
  leaves.push_back({rcl, "renorm claim", "csv", [&](const Globals& gl) {
                      require(claim_reps >= 1, "replicas must be positive");
                      const auto lad = renorm::build_ladder(co.cfg);
                      std::vector<renorm::BoxRun> runs(static_cast<std::size_t>(claim_reps));
                      std::vector<renorm::SlowBoxVerdict> vs(runs.size());
                      parallel_for(runs.size(), [&](std::size_t r) {
                        runs[r] = renorm::simulate_box_run(lad, claim_k, cw.rho, cw.q, cw.params(),
                                                           hash_keys(gl.seed, {r}), max_site_steps);
                        vs[r] = renorm::three_slow_boxes_check(lad, claim_k, runs[r]);
                      });
                      Output o;
                      Table t;
                      t.columns = {"replica", "slow_boxes", "distinct_layers", "big_bad", "holds", "layers_consistent", "seed"};
                      int violations = 0;
                      for (std::size_t r = 0; r < runs.size(); ++r) {
                        t.rows.push_back({r, runs[r].slow.size(), vs[r].distinct_layers, runs[r].big_bad, vs[r].holds,
                                          vs[r].layers_consistent, gl.seed});
                        violations += !vs[r].holds || !vs[r].layers_consistent;
                      }
                      o.result = {{"violations", violations}, {"replicas", claim_reps}};
                      o.table = t;
                      if (violations > 0) o.exit_code = 5;
                      return o;
                    }});

  double ts_beta = 1.0, ts_a = 60.0;
  std::int64_t ts_cutoff = 0;
  auto* rt = rn->add_subcommand("tailsum", "tail-sum inequality");
  rt->add_option("--beta", ts_beta, "exponent beta");
  rt->add_option("--a", ts_a, "lower summation limit");
  rt->add_option("--cutoff", ts_cutoff, "explicit summation cutoff (0 chooses one)");
  leaves.push_back({rt, "renorm tailsum", "json", [&](const Globals&) {
                      const auto t = renorm::tail_sum_check(
                          ts_beta, ts_a, ts_cutoff > 0 ? std::optional<std::int64_t>(ts_cutoff) : std::nullopt);
                      Output o;
                      o.result = {{"beta", t.beta},
                                  {"a", t.a},
                                  {"alpha0", t.alpha0},
                                  {"cutoff", t.cutoff},
                                  {"lhs", t.lhs},
                                  {"remainder", t.remainder},
                                  {"remainder_certified", t.remainder_certified},
                                  {"integral", t.integral},
                                  {"D", t.D},
                                  {"rhs", t.rhs},
                                  {"holds", t.holds}};
                      if (!t.holds || !t.remainder_certified) o.exit_code = 5;
                      return o;
                    }});

  // slt
  auto* sl = app.add_subcommand("slt", "soft local times");
  sl->require_subcommand(1);

  SigmaOpts so;
  auto* ss = sl->add_subcommand("sample", "Poisson point process on Sigma x [0, cap]");
  add_sigma(ss, so);
  leaves.push_back({ss, "slt sample", "csv", [&](const Globals& gl) {
                      const auto sig = so.sites();
                      const auto m = slt::sample_point_process(sig, std::vector<double>(sig.size(), so.mu), so.cap, gl.seed);
                      Output o;
                      Table t;
                      t.columns = {"z", "v", "seed"};
                      for (const auto& p : m.points()) t.rows.push_back({p.z, p.v, gl.seed});
                      o.result = {{"points", m.count()}, {"expected", m.total_mass() * so.cap}};
                      o.table = t;
                      return o;
                    }});

  SigmaOpts sso;
  std::vector<std::string> densities;
  auto* sm = sl->add_subcommand("simulate", "iterated soft-local-time simulation of densities");
  add_sigma(sm, sso);
  sm->add_option("--g", densities, "density w.r.t. mu as a comma list over Sigma; repeat for a sequence")->required();
  leaves.push_back({sm, "slt simulate", "csv", [&](const Globals& gl) {
                      const auto sig = sso.sites();
                      std::vector<slt::Density> gs;
                      for (const auto& d : densities) {
                        auto w = parse_list(d);
                        require(w.size() == sig.size(), "each --g needs one value per site of Sigma");
                        gs.push_back({0, std::move(w)});
                      }
                      const auto m = slt::sample_point_process(sig, std::vector<double>(sig.size(), sso.mu), sso.cap, gl.seed);
                      const auto seq = slt::simulate_sequence(m, gs);
                      Output o;
                      Table t;
                      t.columns = {"j", "z", "rank", "xi", "tie", "seed"};
                      for (std::size_t j = 0; j < seq.draws.size(); ++j) {
                        const auto& d = seq.draws[j];
                        t.rows.push_back({j + 1, d.z, d.rank, d.xi, d.tie, gl.seed});
                      }
                      o.result = {{"G", seq.slt.G}, {"ties", seq.ties}};
                      o.table = t;
                      return o;
                    }});

  int dom_sites = 5, dom_J = 8;
  double dom_rho = 1.0;
  std::size_t dom_reps = 10000;
  auto* sd = sl->add_subcommand("dominate", "domination of the point process by J uniform samples");
  sd->add_option("--sites", dom_sites, "number of sites, each with mu = 1");
  sd->add_option("--J", dom_J, "number of samples");
  sd->add_option("--rho", dom_rho, "height level");
  sd->add_option("--replicas", dom_reps, "replicas");
  leaves.push_back({sd, "slt dominate", "json", [&](const Globals& gl) {
                      require(dom_sites >= 1 && dom_J >= 1, "sites and J must be positive");
                      const auto sig = kernel::interval_sites(0, dom_sites - 1);
                      const std::vector<slt::Density> gs(
                          static_cast<std::size_t>(dom_J),
                          slt::Density{0, std::vector<double>(sig.size(), 1.0 / static_cast<double>(dom_sites))});
                      const auto r = slt::domination_check(sig, std::vector<double>(sig.size(), 1.0), gs, dom_rho,
                                                           dom_reps, gl.seed);
                      Output o;
                      o.result = {{"replicas", r.replicas},   {"lhs_hat", r.lhs_hat},
                                  {"rhs_hat", r.rhs_hat},     {"joint_se", r.joint_se},
                                  {"implication_violations", r.implication_violations},
                                  {"holds", r.holds}};
                      if (!r.holds || r.implication_violations > 0) o.exit_code = 5;
                      return o;
                    }});

  slt::CouplingConfig cc;
  int couple_L = 4;
  auto* scp = sl->add_subcommand("couple", "endpoint coupling of walkers started on every site of H");
  scp->add_option("--L", couple_L, "paving length; H' = [0, L)");
  scp->add_option("--n", cc.n, "walk length; H = H' widened by n");
  scp->add_option("--q", cc.q, "laziness");
  scp->add_option("--rho", cc.rho, "density of the starting points");
  scp->add_option("--rho-prime", cc.rho_prime, "target density");
  scp->add_option("--replicas", cc.replicas, "replicas");
  leaves.push_back({scp, "slt couple", "json", [&](const Globals& gl) {
                      require(couple_L >= 1 && cc.n >= 1, "L and n must be positive");
                      cc.seed = gl.seed;
                      const auto H = kernel::interval_sites(-cc.n, couple_L - 1 + cc.n);
                      const auto r = slt::endpoint_coupling(H, kernel::Paving(H, couple_L),
                                                            kernel::interval_sites(0, couple_L - 1), cc);
                      Output o;
                      o.result = {{"replicas", r.replicas},
                                  {"h_prime_size", r.h_prime_size},
                                  {"frequency", r.frequency.estimate},
                                  {"frequency_lo", r.frequency.lo},
                                  {"frequency_hi", r.frequency.hi},
                                  {"c_integration", r.c_integration},
                                  {"c_local", r.c_local},
                                  {"exponent_constant", r.exponent_constant},
                                  {"fitted_bound", r.fitted_bound},
                                  {"chernoff_bound", r.chernoff_bound},
                                  {"mean_G_center", r.mean_G_center},
                                  {"mean_G_center_se", r.mean_G_center_se},
                                  {"expected_G_center", r.expected_G_center},
                                  {"ties", r.ties},
                                  {"holds", r.holds},
                                  {"holds_chernoff", r.holds_chernoff}};
                      if (!r.holds) o.exit_code = 5;
                      return o;
                    }});

  // stats
  auto* st = app.add_subcommand("stats", "ensemble estimators");
  st->require_subcommand(1);
  WalkOpts sw;
  std::int64_t st_n = 1000;
  std::size_t st_reps = 100;
  const auto ensemble = [&](const Globals& gl) {
    stats::EnsembleConfig c;
    c.w = sw.params();
    c.rho = sw.rho;
    c.q = sw.q;
    c.n = st_n;
    c.replicas = st_reps;
    c.seed = gl.seed;
    c.max_work = gl.max_work;
    return c;
  };
  const auto add_ensemble = [&](CLI::App* a) {
    add_walk(a, sw);
    a->add_option("--n", st_n, "horizon");
    a->add_option("--replicas", st_reps, "replicas");
  };

  auto* sp = st->add_subcommand("speed", "speed estimate with a normal CI");
  add_ensemble(sp);
  leaves.push_back({sp, "stats speed", "json", [&](const Globals& gl) {
                      const auto c = ensemble(gl);
                      const auto s = stats::estimate_speed(c);
                      Output o;
                      o.result = {{"v_hat", s.v_hat},
                                  {"se", s.se},
                                  {"ci_lo", s.ci_lo},
                                  {"ci_hi", s.ci_hi},
                                  {"level", s.level},
                                  {"sandwich", stats::speed_sandwich(s, c.w)},
                                  {"sigma2", stats::ensemble_sigma2(s.X, s.n).value},
                                  {"sigma2_se", stats::ensemble_sigma2(s.X, s.n).se}};
                      Table t;
                      t.columns = {"replica", "X_n", "seed"};
                      for (std::size_t r = 0; r < s.X.size(); ++r) t.rows.push_back({r, s.X[r], gl.seed});
                      o.table = t;
                      return o;
                    }});

  double clt_v = 0.0, clt_sigma = 1.0;
  auto* scl = st->add_subcommand("clt", "KS test of the rescaled walk and the variance curve");
  add_ensemble(scl);
  scl->add_option("--v-hat", clt_v, "speed estimate")->required();
  scl->add_option("--sigma-hat", clt_sigma, "sigma estimate")->required();
  leaves.push_back({scl, "stats clt", "json", [&](const Globals& gl) {
                      const auto r = stats::clt_test(ensemble(gl), clt_v, clt_sigma);
                      json marg = json::array(), pair = json::array();
                      for (std::size_t i = 0; i < r.marginals.size(); ++i)
                        marg.push_back({{"t", r.fractions[i]}, {"D", r.marginals[i].statistic}, {"p", r.marginals[i].p_value}});
                      for (const auto& p : r.pairwise) pair.push_back({{"D", p.statistic}, {"p", p.p_value}});
                      Output o;
                      o.result = {{"terminal_D", r.terminal.statistic},
                                  {"terminal_p", r.terminal.p_value},
                                  {"marginals", marg},
                                  {"pairwise", pair},
                                  {"var_times", r.var_times},
                                  {"var_values", r.var_values},
                                  {"var_slope", r.var_slope.slope},
                                  {"var_slope_se", r.var_slope.slope_se}};
                      return o;
                    }});

  double ld_v = 0.3;
  std::vector<double> ld_L{5, 10, 20, 40};
  auto* sld = st->add_subcommand("ld", "ballisticity: frequency of falling L behind speed v-star");
  add_ensemble(sld);
  sld->add_option("--v-star", ld_v, "speed v_star in (0,1]");
  sld->add_option("--L", ld_L, "list of L")->delimiter(',');
  leaves.push_back({sld, "stats ld", "csv", [&](const Globals& gl) {
                      const auto r = stats::ballisticity_probe(ensemble(gl), ld_v, ld_L);
                      Output o;
                      Table t;
                      t.columns = {"L", "hits", "p_hat", "se", "seed"};
                      for (const auto& row : r.rows) t.rows.push_back({row.L, row.hits, row.p_hat, row.se, gl.seed});
                      o.result = {{"monotone", r.monotone}, {"slope_L", r.slope_L.slope}, {"slope_L_se", r.slope_L.slope_se}};
                      if (r.gamma) o.result["gamma"] = *r.gamma;
                      o.table = t;
                      return o;
                    }});

  double cov_rho = 1.0, cov_q = 0.5;
  std::vector<int> cov_n{2, 8, 32};
  std::size_t cov_reps = 20000;
  auto* scv = st->add_subcommand("cov", "occupancy covariance against the closed form");
  scv->add_option("--rho", cov_rho, "particle density");
  scv->add_option("--q", cov_q, "laziness");
  scv->add_option("--n", cov_n, "list of time lags")->delimiter(',');
  scv->add_option("--replicas", cov_reps, "environments per lag");
  leaves.push_back({scv, "stats cov", "csv", [&](const Globals& gl) {
                      Output o;
                      Table t;
                      t.columns = {"n", "replicas", "cov", "se", "theory", "sqrt_n_cov", "sqrt_n_cov_se", "seed"};
                      for (int n : cov_n) {
                        const auto r = stats::covariance_empirical(cov_rho, cov_q, n, cov_reps,
                                                                   hash_keys(gl.seed, {static_cast<std::uint64_t>(n)}));
                        t.rows.push_back({r.n, r.replicas, r.cov, r.se, r.theory, r.sqrt_n_cov, r.sqrt_n_cov_se, gl.seed});
                      }
                      o.table = t;
                      return o;
                    }});

  stats::DecouplingConfig dc;
  std::vector<int> dec_n{16, 64, 256};
  std::int64_t dec_a = 0, dec_b = 0;
  std::optional<double> dec_rho_s;
  auto* sdc = st->add_subcommand("decouple", "FKG and sprinkled decoupling for vacancy events");
  sdc->add_option("--rho", dc.rho, "particle density");
  sdc->add_option("--q", dc.q, "laziness");
  sdc->add_option("--rho-sprinkled", dec_rho_s, "sprinkled density (default rho (1 + n^{-1/16}))");
  sdc->add_option("--n", dec_n, "list of time separations")->delimiter(',');
  sdc->add_option("--a", dec_a, "left end of the vacant segment");
  sdc->add_option("--b", dec_b, "right end of the vacant segment");
  sdc->add_option("--replicas", dc.replicas, "replicas");
  leaves.push_back({sdc, "stats decouple", "csv", [&](const Globals& gl) {
                      Output o;
                      Table t;
                      t.columns = {"n", "rho", "rho_sprinkled", "lhs", "rhs", "gap", "gap_se", "sprinkled_holds", "cov",
                                   "cov_se", "fkg_holds", "seed"};
                      for (int n : dec_n) {
                        auto c = dc;
                        c.rho_sprinkled = dec_rho_s;
                        c.seed = hash_keys(gl.seed, {static_cast<std::uint64_t>(n)});
                        const auto r = stats::decoupling_probe(c, stats::vacancy_event(dec_a, dec_b, 0),
                                                               stats::vacancy_event(dec_a, dec_b, n));
                        t.rows.push_back({r.n, r.rho, r.rho_sprinkled, r.lhs, r.rhs, r.gap, r.gap_se, r.sprinkled_holds,
                                          r.cov, r.cov_se, r.fkg_holds, gl.seed});
                      }
                      o.table = t;
                      return o;
                    }});

  // verify
  std::string level = "quick", fault = "none";
  std::vector<int> only;
  auto* vc = app.add_subcommand("verify", "acceptance battery");
  vc->add_option("--level", level, "quick or full")->check(CLI::IsMember({"quick", "full"}));
  vc->add_option("--fault", fault, "fault injection: none or kernel")->check(CLI::IsMember({"none", "kernel"}));
  vc->add_option("--only", only, "criterion ids")->delimiter(',')->check(CLI::Range(1, verify::kCriteria));
  leaves.push_back({vc, "verify", "text", [&](const Globals& gl) {
                      verify::Options opt;
                      opt.level = verify::parse_level(level);
                      opt.seed = gl.seed;
                      opt.fault = fault == "kernel" ? verify::Fault::Kernel : verify::Fault::None;
                      opt.only = only;
                      const auto rep = verify::run(opt);
                      Output o;
                      o.text = verify::format(rep);
                      json crit = json::array();
                      for (const auto& c : rep.criteria) {
                        json checks = json::array();
                        for (const auto& k : c.checks) checks.push_back({{"name", k.name}, {"pass", k.pass}, {"detail", k.detail}});
                        crit.push_back({{"id", c.id}, {"title", c.title}, {"pass", c.pass()}, {"checks", checks}});
                      }
                      o.result = {{"level", level}, {"pass", rep.pass()}, {"failures", rep.failures()}, {"criteria", crit}};
                      if (!rep.pass()) o.exit_code = 5;
                      return o;
                    }});

  if (argc <= 1) {
    std::cout << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  const Leaf* leaf = nullptr;
  for (const auto& l : leaves)
    if (l.app->parsed()) leaf = &l;
  if (!leaf) {
    std::cerr << "usage error: a subcommand is required\n";
    return 2;
  }

  try {
    if (g.threads > 0) set_threads(g.threads);
    std::string format = g.format == "auto" ? leaf->default_format : g.format;
    if (format == "text" && g.format != "auto") format = g.format;
    json config = collect(leaf->app, json::object());
    config["seed"] = std::to_string(g.seed);
    config["max-work"] = json(g.max_work).dump();
    const Output out = leaf->run(g);
    if (g.output.empty()) {
      write(std::cout, leaf->name, g, config, out, format);
    } else {
      std::ofstream f(g.output);
      if (!f) throw ResourceError("cannot open " + g.output);
      write(f, leaf->name, g, config, out, format);
    }
    if (out.exit_code != 0) std::cerr << "verification failed: " << leaf->name << "\n";
    return out.exit_code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 5;
  }
}
