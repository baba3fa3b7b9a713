// Acceptance run: one [PASS]/[FAIL] line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "nbchain/nbchain.hpp"
#include "oracle.hpp"

using namespace nbchain;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

/// Random reversible corpus shared by AC3, AC4 and AC11.
std::vector<ExampleSpec> random_corpus() {
  std::vector<ExampleSpec> out;
  for (std::uint64_t seed = 0; seed < 50; ++seed) out.push_back(random_reversible(3 + seed % 6, 0.5, 1000 + seed));
  return out;
}

Outcome ac1_line_zero_variance() {
  Outcome o;
  double worst = 0.0;
  for (const std::size_t N : {3u, 5u, 9u, 17u}) {
    const ExampleSpec lw = line_walk(N);
    const ExpandedChain e = build_nobacktrack(lw.chain, liu_kernel(lw.chain));
    for (std::uint64_t k = 0; k < 10; ++k) {
      const StateFunction f = random_integer_function(N, -10, 10, derive_seed(N, k));
      const double v = exact_asymptotic_variance(e.chain(), e.lifted_dist(), lift_function(f, e));
      worst = std::max(worst, std::abs(v));
    }
  }
  o.pass = worst <= 1e-10;
  o.detail = fmt("max |V| over 40 functions = %.3g", worst);
  return o;
}

Outcome ac2_line_scaling() {
  Outcome o;
  std::vector<double> ns, vs, vs_scaled;
  for (const std::size_t N : {8u, 16u, 32u, 64u}) {
    const ExampleSpec lw = line_walk(N);
    const double v = exact_asymptotic_variance(lw.chain, lw.dist, lw.f);
    ns.push_back(static_cast<double>(N));
    vs.push_back(v);
    vs_scaled.push_back(v / static_cast<double>(N * N));
  }
  const double slope = loglog_slope(ns, vs);
  o.pass = std::abs(slope - 2.0) <= 0.2;
  o.detail = fmt("slope of V(f=x) = %.4f (target 2 +/- 0.2); with f=x/N the slope is %.4f", slope, loglog_slope(ns, vs_scaled));
  return o;
}

Outcome ac3_variance_ordering(const std::vector<ExampleSpec>& corpus) {
  Outcome o;
  int ok = 0, total = 0;
  double worst = -1e300;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const ExampleSpec& s = corpus[i];
    for (std::uint64_t k = 0; k < 3; ++k) {
      const StateFunction f = random_integer_function(s.chain.size(), -5, 5, derive_seed(i, k + 7));
      const double v0 = exact_asymptotic_variance(s.chain, s.dist, f);
      const double v1 = nobacktrack_variance(s.chain, f);
      ++total;
      ok += v1 <= v0 + 1e-9 ? 1 : 0;
      worst = std::max(worst, v1 - v0);
    }
  }
  o.pass = ok == total;
  o.detail = std::to_string(ok) + "/" + std::to_string(total) + fmt(", max V'-V = %.3g", worst);
  return o;
}

Outcome ac4_lift_properties(const std::vector<ExampleSpec>& corpus) {
  Outcome o;
  int ok = 0;
  for (const ExampleSpec& s : corpus) {
    const ExpandedChain e = build_nobacktrack(s.chain, liu_kernel(s.chain));
    const bool good = check_irreducible(e.chain()) && check_invariant(e.chain(), e.lifted_dist(), 1e-10) &&
                      (s.chain.size() < 3 || !check_detailed_balance(e.chain(), e.lifted_dist(), 1e-10));
    ok += good ? 1 : 0;
  }
  // Two states without self-loops: the lift is the swap of the two pair-states.
  const FiniteChain flip = validate_chain((Matrix(2, 2) << 0.0, 1.0, 1.0, 0.0).finished());
  const ExpandedChain ef = build_nobacktrack(flip, liu_kernel(flip));
  const bool two_state = check_detailed_balance(ef.chain(), ef.lifted_dist(), 1e-10);
  // Two states with self-loops lift to a 4-cycle, which is not reversible.
  const FiniteChain lazy = line_walk(2).chain;
  const ExpandedChain el = build_nobacktrack(lazy, liu_kernel(lazy));
  const bool lazy_rev = check_detailed_balance(el.chain(), el.lifted_dist(), 1e-10);
  o.pass = ok == static_cast<int>(corpus.size()) && two_state;
  o.detail = std::to_string(ok) + "/" + std::to_string(corpus.size()) + " chains; 2-state flip lift reversible: " +
             (two_state ? "yes" : "no") + "; 2-state lazy lift reversible: " + (lazy_rev ? "yes" : "no");
  return o;
}

Outcome ac5_peskun() {
  Outcome o;
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ElementaryPairExample ex = random_elementary_pair(3 + seed % 5, 500 + seed);
    const double v0 = exact_asymptotic_variance(ex.old_spec.chain, ex.old_spec.dist, ex.old_spec.f);
    const double v1 = exact_asymptotic_variance(ex.new_chain, ex.old_spec.dist, ex.old_spec.f);
    ok += v1 <= v0 + 1e-9 ? 1 : 0;
  }
  const PeskunMatrices pm = peskun_matrices();
  const auto steps = pairwise_decomposition(pm.old_chain, pm.new_chain, pm.dist);
  Matrix printed(3, 3);
  printed << 0.3, 0.5, 0.2, 0.5, 0.3, 0.2, 0.4, 0.4, 0.2;
  const double middle_err = steps.empty() ? 1.0 : (steps[0].matrix() - printed).cwiseAbs().maxCoeff();
  const bool decomposition = steps.size() == 2 && middle_err <= 1e-15 && steps[1].matrix() == pm.new_chain.matrix();
  o.pass = ok == 50 && decomposition;
  o.detail = std::to_string(ok) + "/50 pairs; " + std::to_string(steps.size()) + " steps, middle max error " + fmt("%.3g", middle_err);
  return o;
}

Outcome ac6_counterexample() {
  Outcome o;
  const auto [old_spec, new_spec] = peskun_counterexample(0.5);
  const double v_old = exact_asymptotic_variance(old_spec.chain, old_spec.dist, old_spec.f);
  const double v_new = exact_asymptotic_variance(new_spec.chain, new_spec.dist, new_spec.f);
  const std::size_t n = 10000;
  const Trajectory t = simulate(old_spec.chain, n, 2024, StateIndex{0});
  double sum = 0.0, worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sum += old_spec.f[t.states[k]];
    worst = std::max(worst, std::abs(sum));
  }
  const bool bound = worst <= 1.0 + 1e-12;
  o.pass = v_old <= 1e-10 && v_new >= 0.01 && bound;
  o.detail = fmt("V(T) = %.3g, V(T') = %.6f, max n|mean_n| = %.3g", v_old, v_new, worst);
  return o;
}

Outcome ac7_block_laws() {
  Outcome o;
  std::vector<std::pair<FiniteChain, FiniteChain>> pairs;
  std::vector<Distribution> dists;
  std::vector<StateFunction> fs;
  {
    const auto [a, b] = peskun_counterexample();
    pairs.emplace_back(a.chain, b.chain);
    dists.push_back(a.dist);
    fs.push_back(a.f);
  }
  for (std::uint64_t s = 0; s < 5; ++s) {
    const ElementaryPairExample ex = random_elementary_pair(4 + s, 70 + s);
    pairs.emplace_back(ex.old_spec.chain, ex.new_chain);
    dists.push_back(ex.old_spec.dist);
    fs.push_back(ex.old_spec.f);
  }
  double worst_z = 0.0;
  long long worst_gap = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const DeltaCoupling c = extract_coupling(pairs[i].first, pairs[i].second, dists[i]);
    const auto runs = delta_coupled_simulate(pairs[i].first, c, 1000000, derive_seed(99, i));
    for (const auto& [traj, role] : {std::pair{&runs.old_traj, ChainRole::Old}, std::pair{&runs.new_traj, ChainRole::New}}) {
      const BlockStatistics st = block_statistics(segment_blocks(*traj, fs[i], BlockAnchors::from(c), role));
      const double N = static_cast<double>(st.total);
      for (const auto& [x, y] : {std::pair{BlockType::AA, BlockType::BB}, std::pair{BlockType::AB, BlockType::BA}}) {
        const double px = st.fraction(x), py = st.fraction(y);
        const double se = std::sqrt((px + py - (px - py) * (px - py)) / N);
        const double z = se > 0.0 ? std::abs(px - py) / se : 0.0;
        worst_z = std::max(worst_z, z);
      }
      if (role == ChainRole::New) {
        const long long gap = std::llabs(static_cast<long long>(st.count(BlockType::AA)) - static_cast<long long>(st.count(BlockType::BB)));
        worst_gap = std::max(worst_gap, gap);
      }
    }
  }
  o.pass = worst_z <= 3.0 && worst_gap <= 1;
  o.detail = fmt("max |P(x)-P(y)|/stderr = %.3f over 6 pairs x 2 chains, max new |N_AA-N_BB| = %.0f", worst_z,
                 static_cast<double>(worst_gap));
  return o;
}

Outcome from_reproduce(const std::string& target) {
  const ReproduceResult r = reproduce(target, {});
  Outcome o;
  o.pass = r.pass;
  if (target == "lemma1") {
    double worst = 0.0;
    for (const auto& row : r.json["rows"]) worst = std::max(worst, std::abs(row["z"].get<double>()));
    o.detail = fmt("max |z| = %.3f over 6 cases (n = 1e5, reps = 200)", worst);
  } else if (target == "lemma2") {
    o.detail = "runs passing: " + r.json["passing_runs"].dump() + "/20, control z = " + fmt("%.3f", r.json["rows"].back()["z"].get<double>());
  } else if (target == "rectangle") {
    std::string ratios;
    for (const auto& row : r.json["rows"]) ratios += fmt("%.4f ", row["ratio"].get<double>());
    o.detail = "ratios " + ratios + fmt("max/min = %.4f", r.json["ratio_max"].get<double>() / r.json["ratio_min"].get<double>());
  }
  return o;
}

Outcome ac10_sampler() {
  Outcome o;
  struct Case {
    FiniteChain chain;
    StateIndex x, y;
  };
  const FiniteChain lw = line_walk(5).chain;
  const FiniteChain rc = rectangle(4, 3).chain;
  const std::vector<Case> cases{{lw, 0, 0}, {lw, 0, 1}, {lw, 2, 1}, {lw, 4, 3}, {rc, 4, 1}, {rc, 4, 7},
                                {rc, 0, 0}, {rc, 0, 3}, {rc, 1, 1}, {rc, 5, 2}};
  double worst = 1.0;
  Rng rng(derive_seed(10, 0));
  for (const Case& c : cases) {
    const UpdateKernel k = liu_kernel(c.chain);
    const std::size_t n = c.chain.size();
    std::vector<double> obs(n, 0.0), expected(n, 0.0);
    for (int i = 0; i < 100000; ++i) obs[sample_update(c.chain, c.x, c.y, rng)] += 1.0;
    for (StateIndex z = 0; z < n; ++z) expected[z] = k(c.x, c.y, z);
    worst = std::min(worst, oracle::chi_square_p(obs, expected));
  }
  o.pass = worst > 0.001;
  o.detail = fmt("min chi-square p = %.4f over 10 pair-states", worst);
  return o;
}

Outcome ac11_oracle(const std::vector<ExampleSpec>& corpus) {
  Outcome o;
  std::vector<std::pair<FiniteChain, StateFunction>> chains;
  for (const std::size_t N : {2u, 3u, 5u, 9u}) chains.emplace_back(line_walk(N).chain, line_walk(N).f);
  for (const auto& [N, M] : {std::pair{2u, 2u}, std::pair{3u, 2u}, std::pair{4u, 3u}}) {
    chains.emplace_back(rectangle(N, M).chain, rectangle(N, M).f);
  }
  {
    const auto [a, b] = peskun_counterexample();
    chains.emplace_back(a.chain, a.f);
    chains.emplace_back(b.chain, b.f);
    const PeskunMatrices pm = peskun_matrices();
    const StateFunction f(Vector::LinSpaced(3, 0.0, 2.0));
    chains.emplace_back(pm.old_chain, f);
    chains.emplace_back(pm.middle, f);
    chains.emplace_back(pm.new_chain, f);
  }
  for (const auto& s : corpus) chains.emplace_back(s.chain, s.f);
  // Lifted chains that fit in 12 states.
  std::vector<std::pair<FiniteChain, StateFunction>> lifted;
  for (const auto& [c, f] : chains) {
    if (!check_detailed_balance(c, stationary_distribution(c))) continue;
    const ExpandedChain e = build_nobacktrack(c, liu_kernel(c));
    if (e.size() <= 12) lifted.emplace_back(e.chain(), lift_function(f, e));
  }
  chains.insert(chains.end(), lifted.begin(), lifted.end());

  double worst = 0.0;
  std::size_t count = 0;
  for (const auto& [c, f] : chains) {
    if (c.size() > 12) continue;
    const Vector pi = oracle::stationary_by_eigen(c.matrix());
    const double ref = oracle::autocovariance_variance(c.matrix(), pi, f.values());
    const double v = exact_asymptotic_variance(c, f);
    worst = std::max(worst, std::isnan(ref) ? 1e300 : std::abs(v - ref));
    ++count;
  }
  o.pass = worst <= 1e-8;
  o.detail = std::to_string(count) + fmt(" chains, max |Poisson - autocovariance| = %.3g", worst);
  return o;
}

}  // namespace

int main() {
  const std::vector<ExampleSpec> corpus = random_corpus();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1", ac1_line_zero_variance},
      {"AC2", ac2_line_scaling},
      {"AC3", [&] { return ac3_variance_ordering(corpus); }},
      {"AC4", [&] { return ac4_lift_properties(corpus); }},
      {"AC5", ac5_peskun},
      {"AC6", ac6_counterexample},
      {"AC7", ac7_block_laws},
      {"AC8", [] { return from_reproduce("lemma1"); }},
      {"AC9", [] { return from_reproduce("lemma2"); }},
      {"AC10", ac10_sampler},
      {"AC11", [&] { return ac11_oracle(corpus); }},
      {"AC12", [] { return from_reproduce("rectangle"); }},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %s  %s  (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
