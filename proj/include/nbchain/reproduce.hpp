#pragma once

// Reproduction targets: each computes a table (CSV) and a JSON summary with
// pass/fail verdicts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "nbchain/examples.hpp"
#include "nbchain/io.hpp"
#include "nbchain/no_backtrack.hpp"
#include "nbchain/peskun_blocks.hpp"
#include "nbchain/variance.hpp"

namespace nbchain {

struct ReproduceResult {
  std::string target;
  std::string csv;
  Json json;
  bool pass = false;
};

struct ReproduceOptions {
  std::uint64_t seed = 0;
  std::size_t n = 0;     // 0: target default
  std::size_t reps = 0;  // 0: target default
  double tol = kTolLinear;
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto k = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

/// Exact variance of the no-backtracking chain built with the Liu kernel, for f(second component).
inline double nobacktrack_variance(const FiniteChain& chain, const StateFunction& f, double tol = kTolLinear) {
  const ExpandedChain lifted = build_nobacktrack(chain, liu_kernel(chain), tol);
  return exact_asymptotic_variance(lifted.chain(), lifted.lifted_dist(), lift_function(f, lifted), tol);
}

inline ReproduceResult reproduce_line(const ReproduceOptions& opt) {
  ReproduceResult r{"line", "", Json::object(), true};
  std::ostringstream csv;
  csv << "N,v_original,v_modified,v_original_scaled_f\n";
  std::vector<double> ns, vs, vs_scaled;
  Json rows = Json::array();
  bool zero_ok = true;
  for (const std::size_t N : {3, 5, 8, 9, 16, 17, 32, 64}) {
    const ExampleSpec spec = line_walk(N);
    const double v = exact_asymptotic_variance(spec.chain, spec.dist, spec.f, opt.tol);
    const double vm = nobacktrack_variance(spec.chain, spec.f, opt.tol);
    const StateFunction scaled(Vector(spec.f.values() / static_cast<double>(N)));
    const double vsc = exact_asymptotic_variance(spec.chain, spec.dist, scaled, opt.tol);
    zero_ok = zero_ok && std::abs(vm) <= 1e-10;
    if (N == 8 || N == 16 || N == 32 || N == 64) {
      ns.push_back(static_cast<double>(N));
      vs.push_back(v);
      vs_scaled.push_back(vsc);
    }
    csv << N << ',' << format_double(v) << ',' << format_double(vm) << ',' << format_double(vsc) << '\n';
    rows.push_back({{"N", N}, {"v_original", v}, {"v_modified", vm}, {"v_original_scaled_f", vsc}});
  }
  const double slope = loglog_slope(ns, vs);
  const double slope_scaled = loglog_slope(ns, vs_scaled);
  const bool slope_ok = std::abs(slope - 2.0) <= 0.2;
  r.csv = csv.str();
  r.json = {{"target", "line"},
            {"seed", opt.seed},
            {"rows", rows},
            {"fitted_exponent", slope},
            {"fitted_exponent_f_over_N", slope_scaled},
            {"checks", {{"modified_variance_zero", zero_ok}, {"exponent_within_2_pm_0.2", slope_ok}}}};
  r.pass = zero_ok && slope_ok;
  return r;
}

inline ReproduceResult reproduce_rectangle(const ReproduceOptions& opt) {
  ReproduceResult r{"rectangle", "", Json::object(), true};
  std::ostringstream csv;
  csv << "N,M,states,v_original,v_modified,ratio\n";
  Json rows = Json::array();
  double lo = HUGE_VAL, hi = 0.0;
  for (const auto& [N, M] : std::vector<std::pair<std::size_t, std::size_t>>{{4, 3}, {8, 3}, {16, 3}, {8, 6}}) {
    const ExampleSpec spec = rectangle(N, M);
    const double v = exact_asymptotic_variance(spec.chain, spec.dist, spec.f, opt.tol);
    const double vm = nobacktrack_variance(spec.chain, spec.f, opt.tol);
    const double ratio = v / vm;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    csv << N << ',' << M << ',' << N * M << ',' << format_double(v) << ',' << format_double(vm) << ','
        << format_double(ratio) << '\n';
    rows.push_back({{"N", N}, {"M", M}, {"v_original", v}, {"v_modified", vm}, {"ratio", ratio}});
  }
  const bool band_ok = hi / lo <= 3.0 && lo >= 1.0;
  r.csv = csv.str();
  r.json = {{"target", "rectangle"},
            {"seed", opt.seed},
            {"rows", rows},
            {"ratio_min", lo},
            {"ratio_max", hi},
            {"checks", {{"ratio_within_factor_3_band", band_ok}}}};
  r.pass = band_ok;
  return r;
}

inline ReproduceResult reproduce_counterexample(const ReproduceOptions& opt) {
  ReproduceResult r{"counterexample", "", Json::object(), true};
  const auto [old_spec, new_spec] = peskun_counterexample(0.5);
  const double v_old = exact_asymptotic_variance(old_spec.chain, old_spec.dist, old_spec.f, opt.tol);
  const double v_new = exact_asymptotic_variance(new_spec.chain, new_spec.dist, new_spec.f, opt.tol);
  const std::size_t n = opt.n ? opt.n : 10000;

  // Running-mean bound along an old-chain path started at A.
  const Trajectory traj = simulate(old_spec.chain, n, opt.seed, StateIndex{0});
  double sum = 0.0;
  double worst = 0.0;
  bool bound_ok = true;
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    sum += old_spec.f[traj.states[t]];
    const double m = std::abs(sum / static_cast<double>(t + 1));
    worst = std::max(worst, m * static_cast<double>(t + 1));
    bound_ok = bound_ok && m <= 1.0 / static_cast<double>(t + 1) + 1e-15;
  }
  const bool invariant_ok = check_invariant(old_spec.chain, old_spec.dist, opt.tol) &&
                            check_invariant(new_spec.chain, new_spec.dist, opt.tol);
  std::ostringstream csv;
  csv << "chain,v_exact\nold," << format_double(v_old) << "\nnew," << format_double(v_new) << '\n';
  r.csv = csv.str();
  r.json = {{"target", "counterexample"},
            {"seed", opt.seed},
            {"delta", 0.5},
            {"v_old", v_old},
            {"v_new", v_new},
            {"n", n},
            {"max_n_times_abs_mean", worst},
            {"checks",
             {{"v_old_zero", v_old <= 1e-10},
              {"v_new_at_least_0.01", v_new >= 0.01},
              {"mean_within_1_over_n", bound_ok},
              {"both_invariant", invariant_ok}}}};
  r.pass = v_old <= 1e-10 && v_new >= 0.01 && bound_ok && invariant_ok;
  return r;
}

inline ReproduceResult reproduce_peskun_matrices(const ReproduceOptions& opt) {
  ReproduceResult r{"peskun-matrices", "", Json::object(), true};
  const PeskunMatrices pm = peskun_matrices();
  const auto steps = pairwise_decomposition(pm.old_chain, pm.new_chain, pm.dist, opt.tol);
  const bool two_steps = steps.size() == 2;
  const double middle_err = two_steps ? (steps[0].matrix() - pm.middle.matrix()).cwiseAbs().maxCoeff() : HUGE_VAL;
  const bool middle_ok = middle_err <= 1e-15;
  const bool last_ok = two_steps && (steps[1].matrix() - pm.new_chain.matrix()).cwiseAbs().maxCoeff() == 0.0;
  bool balance_ok = true;
  std::ostringstream csv;
  csv << "matrix,row,c1,c2,c3,detailed_balance\n";
  const std::vector<std::pair<std::string, const FiniteChain*>> named{
      {"T", &pm.old_chain}, {"middle", &pm.middle}, {"T_new", &pm.new_chain}};
  Json mats = Json::object();
  for (const auto& [name, chain] : named) {
    const bool db = check_detailed_balance(*chain, pm.dist, opt.tol);
    balance_ok = balance_ok && db;
    for (Eigen::Index i = 0; i < 3; ++i) {
      csv << name << ',' << i + 1;
      for (Eigen::Index j = 0; j < 3; ++j) csv << ',' << format_double(chain->matrix()(i, j));
      csv << ',' << (db ? "true" : "false") << '\n';
    }
    mats[name] = {{"T", matrix_to_json(chain->matrix())}, {"detailed_balance", db}};
  }
  for (const auto& step : steps) balance_ok = balance_ok && check_detailed_balance(step, pm.dist, opt.tol);
  r.csv = csv.str();
  r.json = {{"target", "peskun-matrices"},
            {"seed", opt.seed},
            {"pi", vector_to_json(pm.dist.probabilities())},
            {"matrices", mats},
            {"decomposition_steps", steps.size()},
            {"middle_max_abs_error", two_steps ? Json(middle_err) : Json(nullptr)},
            {"checks",
             {{"two_steps", two_steps},
              {"middle_matches", middle_ok},
              {"last_step_is_T_new", last_ok},
              {"all_detailed_balance", balance_ok}}}};
  r.pass = two_steps && middle_ok && last_ok && balance_ok;
  return r;
}

/// Chains and visit sets used by the fixed-visit-count comparison.
struct Lemma1Case {
  std::string name;
  ExampleSpec spec;
  std::vector<StateIndex> subset;
};

inline std::vector<Lemma1Case> lemma1_cases(std::uint64_t seed) {
  std::vector<Lemma1Case> cases;
  const ExampleSpec line = line_walk(5);
  const ExampleSpec rect = rectangle(4, 3);
  const ExampleSpec rnd = random_reversible(6, 0.5, derive_seed(seed, 100));
  cases.push_back({"line_walk(5) S={1}", line, {0}});
  cases.push_back({"line_walk(5) S={2,4}", line, {1, 3}});
  cases.push_back({"rectangle(4x3) S={corner}", rect, {0}});
  cases.push_back({"rectangle(4x3) S=first column", rect, {0, 1, 2}});
  cases.push_back({"random_reversible(6) S={0}", rnd, {0}});
  cases.push_back({"random_reversible(6) S={0,1,2}", rnd, {0, 1, 2}});
  return cases;
}

inline ReproduceResult reproduce_lemma1(const ReproduceOptions& opt) {
  ReproduceResult r{"lemma1", "", Json::object(), true};
  const std::size_t n = opt.n ? opt.n : 100000;
  const std::size_t reps = opt.reps ? opt.reps : 200;
  std::ostringstream csv;
  csv << "case,fixed_length,fixed_length_se,fixed_visits,fixed_visits_se,z,pass\n";
  Json rows = Json::array();
  std::uint64_t i = 0;
  for (const auto& c : lemma1_cases(opt.seed)) {
    const ComparisonReport rep = lemma1_check(c.spec.chain, c.subset, c.spec.f, n, reps, derive_seed(opt.seed, i++));
    r.pass = r.pass && rep.pass;
    csv << '"' << c.name << "\"," << format_double(rep.old_est.est) << ',' << format_double(rep.old_est.stderr_) << ','
        << format_double(rep.new_est.est) << ',' << format_double(rep.new_est.stderr_) << ',' << format_double(rep.z)
        << ',' << (rep.pass ? "true" : "false") << '\n';
    Json row = to_json(rep);
    row["case"] = c.name;
    rows.push_back(std::move(row));
  }
  r.csv = csv.str();
  r.json = {{"target", "lemma1"}, {"seed", opt.seed}, {"n", n}, {"reps", reps}, {"rows", rows},
            {"checks", {{"all_abs_z_below_4", r.pass}}}};
  return r;
}

inline ReproduceResult reproduce_lemma2(const ReproduceOptions& opt) {
  ReproduceResult r{"lemma2", "", Json::object(), true};
  const std::size_t n = opt.n ? opt.n : 2000;
  const std::size_t reps = opt.reps ? opt.reps : 400;
  std::ostringstream csv;
  csv << "run,law,var_R,var_R_se,var_R_strat,var_R_strat_se,z,pass\n";
  Json rows = Json::array();
  std::size_t passes = 0;
  constexpr std::size_t kRuns = 20;
  auto emit = [&](const std::string& run, const std::string& law, const ComparisonReport& rep) {
    csv << run << ',' << law << ',' << format_double(rep.old_est.est) << ',' << format_double(rep.old_est.stderr_)
        << ',' << format_double(rep.new_est.est) << ',' << format_double(rep.new_est.stderr_) << ','
        << format_double(rep.z) << ',' << (rep.pass ? "true" : "false") << '\n';
    Json row = to_json(rep);
    row["run"] = run;
    row["law"] = law;
    rows.push_back(std::move(row));
  };
  for (std::size_t k = 0; k < kRuns; ++k) {
    const std::uint64_t s = derive_seed(opt.seed, k);
    const BlockLawSpec spec = random_block_law(derive_seed(s, 0), 1.0);
    const FiniteChain types = symmetric_type_chain(derive_seed(s, 1));
    const Distribution rho = stationary_distribution(types);
    const ComparisonReport rep = lemma2_check(spec, rho, types, n, reps, derive_seed(s, 2));
    passes += rep.pass ? 1 : 0;
    emit(std::to_string(k), "distinct", rep);
  }
  const std::uint64_t cs = derive_seed(opt.seed, kRuns);
  const BlockLawSpec control = random_block_law(derive_seed(cs, 0), 0.0, true);
  const FiniteChain types = symmetric_type_chain(derive_seed(cs, 1));
  const ComparisonReport ctl = lemma2_check(control, stationary_distribution(types), types, n, reps, derive_seed(cs, 2));
  const bool control_ok = std::abs(ctl.z) < 4.0;
  emit("control", "q0_equals_q1", ctl);
  const bool runs_ok = passes >= 19;
  r.csv = csv.str();
  r.json = {{"target", "lemma2"},
            {"seed", opt.seed},
            {"n", n},
            {"reps", reps},
            {"rows", rows},
            {"passing_runs", passes},
            {"checks", {{"at_least_19_of_20", runs_ok}, {"control_abs_z_below_4", control_ok}}}};
  r.pass = runs_ok && control_ok;
  return r;
}

inline const std::vector<std::string>& reproduce_targets() {
  static const std::vector<std::string> names{"line", "rectangle", "counterexample", "peskun-matrices", "lemma1", "lemma2"};
  return names;
}

inline ReproduceResult reproduce(const std::string& target, const ReproduceOptions& opt) {
  ReproduceResult r;
  if (target == "line") {
    r = reproduce_line(opt);
  } else if (target == "rectangle") {
    r = reproduce_rectangle(opt);
  } else if (target == "counterexample") {
    r = reproduce_counterexample(opt);
  } else if (target == "peskun-matrices") {
    r = reproduce_peskun_matrices(opt);
  } else if (target == "lemma1") {
    r = reproduce_lemma1(opt);
  } else if (target == "lemma2") {
    r = reproduce_lemma2(opt);
  } else {
    throw Error(ErrorKind::UnknownTarget, "unknown reproduce target \"" + target + "\"");
  }
  r.json["pass"] = r.pass;
  return r;
}

}  // namespace nbchain
