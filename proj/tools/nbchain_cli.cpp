// nbchain: command-line front end for the nbchain library.
//
// Exit codes: 0 all checks passed, 1 a check failed, 2 usage / IO / parse error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nbchain/nbchain.hpp"

namespace {

using namespace nbchain;

constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct RunConfig {
  std::string input;
  std::string out;
  std::string format = "json";
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t reps = 0;
  double tol = kTolLinear;
};

// Subcommand-specific options.
struct LiftArgs {
  std::string kernel = "liu";
};
struct CompareArgs {
  std::vector<double> f;
};
struct BlocksArgs {
  std::string pair_file;
  double delta = 0.5;
};
struct ExampleArgs {
  std::string name;
  std::size_t N = 5;
  std::size_t M = 3;
  std::size_t states = 5;
  double delta = 0.5;
  double density = 0.5;
};

void emit(const RunConfig& cfg, const std::string& text) {
  if (cfg.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
  } else {
    write_text_file(cfg.out, text);
  }
}

std::string yes_no(bool b) { return b ? "true" : "false"; }

Distribution reference_distribution(const ChainFile& file, double tol) {
  return file.dist ? *file.dist : stationary_distribution(file.chain, tol);
}

StateFunction default_function(const ChainFile& file) {
  if (file.f) return *file.f;
  Vector v(static_cast<Eigen::Index>(file.chain.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  return StateFunction(v);
}

// ---------------------------------------------------------------------------

int cmd_analyze(const RunConfig& cfg) {
  const ChainFile file = read_chain_file(cfg.input);
  const FiniteChain& chain = file.chain;
  const bool irreducible = check_irreducible(chain);
  Json j{{"states", chain.labels()}, {"stochastic", true}, {"irreducible", irreducible}};
  bool pass = true;
  std::optional<Distribution> pi;
  try {
    pi = reference_distribution(file, cfg.tol);
  } catch (const Error& e) {
    j["stationary_error"] = e.what();
  }
  if (pi) {
    const bool invariant = check_invariant(chain, *pi, cfg.tol);
    pass = invariant;
    j["pi"] = vector_to_json(pi->probabilities());
    j["pi_source"] = file.dist ? "file" : "solved";
    j["invariant"] = invariant;
    j["reversible"] = check_detailed_balance(chain, *pi, cfg.tol);
  }
  if (file.f && pi && irreducible) j["asymptotic_variance"] = exact_asymptotic_variance(chain, *pi, *file.f, cfg.tol);

  std::cout << "states: " << chain.size() << "\nstochastic: true\nirreducible: " << yes_no(irreducible) << '\n';
  if (pi) {
    std::cout << "reversible: " << yes_no(j["reversible"].get<bool>()) << "\ninvariant: " << yes_no(j["invariant"].get<bool>())
              << "\npi:";
    for (Eigen::Index i = 0; i < pi->probabilities().size(); ++i) std::cout << ' ' << format_double(pi->probabilities()[i]);
    std::cout << '\n';
  }
  if (!cfg.out.empty()) {
    if (cfg.format == "csv") {
      std::ostringstream csv;
      csv << "state,pi\n";
      for (std::size_t i = 0; i < chain.size() && pi; ++i) csv << chain.label(i) << ',' << format_double((*pi)[i]) << '\n';
      write_text_file(cfg.out, csv.str());
    } else {
      write_text_file(cfg.out, j.dump(2) + "\n");
    }
  }
  return pass ? kExitPass : kExitCheckFailed;
}

int cmd_lift(const RunConfig& cfg, const LiftArgs& args) {
  const ChainFile file = read_chain_file(cfg.input);
  const FiniteChain& chain = file.chain;
  const Distribution pi = reference_distribution(file, cfg.tol);
  if (!check_detailed_balance(chain, pi, cfg.tol)) throw Error(ErrorKind::NotReversible, "input chain is not reversible");

  UpdateKernel kernel = args.kernel == "liu" ? liu_kernel(chain) : degenerate_kernel(chain);
  const auto violations = verify_update_conditions(chain, kernel, cfg.tol);
  const ExpandedChain lifted = build_nobacktrack(chain, kernel, cfg.tol);
  const bool irreducible = check_irreducible(lifted.chain());
  const bool invariant = check_invariant(lifted.chain(), lifted.lifted_dist(), cfg.tol);
  const bool reversible = check_detailed_balance(lifted.chain(), lifted.lifted_dist(), cfg.tol);

  std::string reversibility = reversible ? "reversible" : "non-reversible";
  if (args.kernel == "liu" && reversible && chain.size() == 2) reversibility = "reversible (two-state exemption)";

  std::cout << "kernel: " << args.kernel << "\npairs: " << lifted.size() << "\nconditions: "
            << (violations.empty() ? "pass" : "fail") << "\nirreducible: " << yes_no(irreducible)
            << "\ninvariant: " << yes_no(invariant) << "\nreversibility: " << reversibility << '\n';

  bool deterministic = true;
  for (Eigen::Index r = 0; r < lifted.chain().matrix().rows(); ++r) {
    deterministic = deterministic && lifted.chain().matrix().row(r).maxCoeff() == 1.0;
  }
  if (deterministic) std::cout << "deterministic: true\n";

  std::optional<StateFunction> lf;
  if (file.f) lf = lift_function(*file.f, lifted);
  Json out = chain_to_json(lifted.chain(), &lifted.lifted_dist(), lf ? &*lf : nullptr);
  out["conditions"] = {{"violations", violations.size()},
                       {"irreducible", irreducible},
                       {"invariant", invariant},
                       {"reversibility", reversibility},
                       {"deterministic", deterministic}};
  emit(cfg, out.dump(2) + "\n");
  if (!cfg.out.empty()) write_text_file(cfg.out + ".pairs.json", pair_provenance_json(lifted).dump(2) + "\n");
  const bool expect_nonreversible = args.kernel == "liu" && chain.size() >= 3;
  const bool pass = violations.empty() && irreducible && invariant && (!expect_nonreversible || !reversible);
  return pass ? kExitPass : kExitCheckFailed;
}

int cmd_compare(const RunConfig& cfg, const CompareArgs& args) {
  const ChainFile file = read_chain_file(cfg.input);
  const FiniteChain& chain = file.chain;
  const Distribution pi = reference_distribution(file, cfg.tol);
  if (!check_detailed_balance(chain, pi, cfg.tol)) throw Error(ErrorKind::NotReversible, "input chain is not reversible");
  StateFunction f = default_function(file);
  if (!args.f.empty()) {
    if (args.f.size() != chain.size()) throw Error(ErrorKind::DimensionMismatch, "--f needs one value per state");
    f = StateFunction(args.f);
  }
  const std::size_t n = cfg.n ? cfg.n : 10000;
  const std::size_t reps = cfg.reps ? cfg.reps : 100;

  const ExpandedChain lifted = build_nobacktrack(chain, liu_kernel(chain), cfg.tol);
  const StateFunction lf = lift_function(f, lifted);
  VarianceReport base = replicated_variance(chain, f, n, reps, derive_seed(cfg.seed, 0));
  VarianceReport modified = replicated_variance(lifted.chain(), lf, n, reps, derive_seed(cfg.seed, 1));
  base.seed = modified.seed = cfg.seed;
  const double ratio = modified.exact > 0.0 ? base.exact / modified.exact : HUGE_VAL;
  const bool ordered = modified.exact <= base.exact + 1e-9;

  if (cfg.format == "csv") {
    std::ostringstream csv;
    csv << "chain,exact,empirical,stderr,n,reps,seed\n";
    for (const auto& [name, r] : {std::pair{"original", &base}, std::pair{"modified", &modified}}) {
      csv << name << ',' << format_double(r->exact) << ',' << format_double(r->empirical) << ','
          << format_double(r->empirical_stderr) << ',' << r->n << ',' << r->reps << ',' << r->seed << '\n';
    }
    emit(cfg, csv.str());
  } else {
    Json j{{"original", to_json(base)},
           {"modified", to_json(modified)},
           {"ratio", std::isfinite(ratio) ? Json(ratio) : Json("inf")},
           {"modified_not_greater", ordered},
           {"seed", cfg.seed}};
    emit(cfg, j.dump(2) + "\n");
  }
  if (!cfg.out.empty()) {
    std::cout << "original exact: " << format_double(base.exact) << "\nmodified exact: " << format_double(modified.exact)
              << "\nratio: " << (std::isfinite(ratio) ? format_double(ratio) : "inf") << '\n';
  }
  return ordered ? kExitPass : kExitCheckFailed;
}

struct PairInput {
  FiniteChain old_chain;
  FiniteChain new_chain;
  Distribution dist;
  StateFunction f;
};

PairInput load_pair(const BlocksArgs& args, double tol) {
  if (args.pair_file.empty()) {
    auto [o, n] = peskun_counterexample(args.delta);
    return {o.chain, n.chain, o.dist, o.f};
  }
  const Json j = read_json_file(args.pair_file);
  if (!j.contains("old") || !j.contains("new")) throw Error(ErrorKind::ParseError, "pair file needs \"old\" and \"new\" chains");
  ChainFile o = chain_from_json(j["old"]);
  ChainFile n = chain_from_json(j["new"]);
  const Distribution dist = o.dist ? *o.dist : stationary_distribution(o.chain, tol);
  return {o.chain, n.chain, dist, default_function(o)};
}

int cmd_blocks(const RunConfig& cfg, const BlocksArgs& args) {
  const PairInput in = load_pair(args, cfg.tol);
  const DeltaCoupling c = extract_coupling(in.old_chain, in.new_chain, in.dist, cfg.tol);
  const std::size_t n = cfg.n ? cfg.n : 1000000;
  const CoupledTrajectories runs = delta_coupled_simulate(in.old_chain, c, n, cfg.seed);
  const BlockAnchors anchors = BlockAnchors::from(c);
  const BlockTrace old_trace = segment_blocks(runs.old_traj, in.f, anchors, ChainRole::Old);
  const BlockTrace new_trace = segment_blocks(runs.new_traj, in.f, anchors, ChainRole::New);
  const BlockStatistics so = block_statistics(old_trace);
  const BlockStatistics sn = block_statistics(new_trace);

  // Old chain keeps its role across a boundary, new chain swaps it.
  auto role_is_a = [&](StateIndex s) { return s == c.row_a || s == c.stay_a; };
  bool old_keeps = true, new_flips = true;
  for (std::size_t t = 0; t + 1 < runs.old_traj.states.size(); ++t) {
    if (runs.old_traj.marks[t]) old_keeps = old_keeps && role_is_a(runs.old_traj.states[t]) == role_is_a(runs.old_traj.states[t + 1]);
    if (runs.new_traj.marks[t]) new_flips = new_flips && role_is_a(runs.new_traj.states[t]) != role_is_a(runs.new_traj.states[t + 1]);
  }
  const auto diff_naa = static_cast<long long>(sn.count(BlockType::AA)) - static_cast<long long>(sn.count(BlockType::BB));
  const bool stratified = std::llabs(diff_naa) <= 1;

  // |P(AA) - P(BB)| and |P(AB) - P(BA)| within 3 multinomial standard errors.
  auto symmetric = [](const BlockStatistics& s, BlockType x, BlockType y) {
    const double px = s.fraction(x), py = s.fraction(y);
    const double se = std::sqrt((px + py - (px - py) * (px - py)) / static_cast<double>(s.total));
    return std::abs(px - py) <= 3.0 * se;
  };
  const bool laws_ok = symmetric(so, BlockType::AA, BlockType::BB) && symmetric(so, BlockType::AB, BlockType::BA) &&
                       symmetric(sn, BlockType::AA, BlockType::BB) && symmetric(sn, BlockType::AB, BlockType::BA);

  std::ostringstream summary;
  summary << "chain,type,count,mean_H,var_H,mean_L,var_L\n";
  for (const auto& [name, s] : {std::pair{"old", &so}, std::pair{"new", &sn}}) {
    for (const BlockType t : {BlockType::AA, BlockType::AB, BlockType::BA, BlockType::BB}) {
      const auto& st = (*s)[t];
      summary << name << ',' << to_string(t) << ',' << st.count << ',' << format_double(st.mean_H) << ','
              << format_double(st.var_H) << ',' << format_double(st.mean_L) << ',' << format_double(st.var_L) << '\n';
    }
  }
  Json checks{{"old_state_kept_across_boundaries", old_keeps},
              {"new_state_flips_across_boundaries", new_flips},
              {"new_abs_NAA_minus_NBB_le_1", stratified},
              {"type_frequencies_symmetric", laws_ok}};
  const bool pass = old_keeps && new_flips && stratified && laws_ok;

  if (cfg.out.empty()) {
    std::cout << summary.str();
    std::cout << "checks: " << checks.dump() << '\n';
  } else {
    write_text_file(cfg.out + ".old.csv", blocks_csv(old_trace));
    write_text_file(cfg.out + ".new.csv", blocks_csv(new_trace));
    write_text_file(cfg.out + ".summary.csv", summary.str());
    Json j{{"n", n}, {"seed", cfg.seed}, {"old", to_json(so)}, {"new", to_json(sn)}, {"checks", checks}, {"pass", pass}};
    write_text_file(cfg.out + ".json", j.dump(2) + "\n");
    std::cout << summary.str();
  }
  return pass ? kExitPass : kExitCheckFailed;
}

int cmd_reproduce(const RunConfig& cfg, const std::string& target) {
  ReproduceOptions opt{cfg.seed, cfg.n, cfg.reps, cfg.tol};
  std::vector<std::string> targets;
  if (target == "all") {
    targets = reproduce_targets();
  } else {
    targets.push_back(target);
  }
  const std::filesystem::path dir = cfg.out.empty() ? std::filesystem::path(".") : std::filesystem::path(cfg.out);
  std::filesystem::create_directories(dir);
  bool pass = true;
  for (const auto& t : targets) {
    const ReproduceResult r = reproduce(t, opt);
    write_text_file((dir / (t + ".csv")).string(), r.csv);
    write_text_file((dir / (t + ".json")).string(), r.json.dump(2) + "\n");
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << t << '\n';
    pass = pass && r.pass;
  }
  return pass ? kExitPass : kExitCheckFailed;
}

int cmd_example(const RunConfig& cfg, const ExampleArgs& args) {
  auto write_spec = [&](const ExampleSpec& s) { emit(cfg, chain_to_json(s.chain, &s.dist, &s.f).dump(2) + "\n"); };
  const std::string& name = args.name;
  if (name == "line") {
    write_spec(line_walk(args.N));
  } else if (name == "rectangle") {
    write_spec(rectangle(args.N, args.M));
  } else if (name == "counterexample-old" || name == "counterexample-new") {
    const auto [o, n] = peskun_counterexample(args.delta);
    write_spec(name == "counterexample-old" ? o : n);
  } else if (name == "counterexample-pair") {
    const auto [o, n] = peskun_counterexample(args.delta);
    emit(cfg, Json{{"old", chain_to_json(o.chain, &o.dist, &o.f)}, {"new", chain_to_json(n.chain, &n.dist, &n.f)}}.dump(2) + "\n");
  } else if (name == "random-pair") {
    const ElementaryPairExample p = random_elementary_pair(args.states, cfg.seed);
    emit(cfg, Json{{"old", chain_to_json(p.old_spec.chain, &p.old_spec.dist, &p.old_spec.f)},
                   {"new", chain_to_json(p.new_chain, &p.old_spec.dist, &p.old_spec.f)}}
                  .dump(2) + "\n");
  } else if (name == "peskun-T" || name == "peskun-middle" || name == "peskun-T-new") {
    const PeskunMatrices pm = peskun_matrices();
    const FiniteChain& c = name == "peskun-T" ? pm.old_chain : name == "peskun-middle" ? pm.middle : pm.new_chain;
    emit(cfg, chain_to_json(c, &pm.dist).dump(2) + "\n");
  } else if (name == "random") {
    write_spec(random_reversible(args.states, args.density, cfg.seed));
  } else {
    throw Error(ErrorKind::UnknownTarget, "unknown example \"" + name + "\"");
  }
  return kExitPass;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::UnknownTarget:
      return kExitUsage;
    default:
      return kExitCheckFailed;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nbchain: no-backtracking lifted Markov chains, asymptotic variance and block analysis"};
  app.require_subcommand(1);
  RunConfig cfg;
  auto add_common = [&](CLI::App* sub, bool stochastic) {
    sub->add_option("--out", cfg.out, "Output path (directory for reproduce)");
    sub->add_option("--tol", cfg.tol, "Linear-algebra tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    if (stochastic) {
      sub->add_option("--seed", cfg.seed, "RNG seed");
      sub->add_option("--n", cfg.n, "Trajectory length")->check(CLI::PositiveNumber);
      sub->add_option("--reps", cfg.reps, "Replicates")->check(CLI::Range(2ul, std::numeric_limits<std::size_t>::max()));
    }
  };

  auto* analyze = app.add_subcommand("analyze", "Stochasticity, irreducibility, stationary distribution, reversibility");
  analyze->add_option("chain", cfg.input, "Chain JSON file")->required();
  add_common(analyze, false);

  LiftArgs lift_args;
  auto* lift = app.add_subcommand("lift", "Build the lifted chain on pair states");
  lift->add_option("chain", cfg.input, "Chain JSON file")->required();
  lift->add_option("--kernel", lift_args.kernel, "Update kernel")->check(CLI::IsMember({"liu", "identity"}));
  add_common(lift, false);

  CompareArgs compare_args;
  auto* compare = app.add_subcommand("compare", "Exact and empirical variance: original vs no-backtracking chain");
  compare->add_option("chain", cfg.input, "Chain JSON file")->required();
  compare->add_option("--f", compare_args.f, "Function values, one per state")->delimiter(',');
  add_common(compare, true);

  BlocksArgs blocks_args;
  auto* blocks = app.add_subcommand("blocks", "Coupled old/new simulation segmented into blocks");
  blocks->add_option("--pair", blocks_args.pair_file, "Pair JSON {\"old\": chain, \"new\": chain}; default: counterexample");
  blocks->add_option("--delta", blocks_args.delta, "Counterexample delta in (0, 1/2]");
  add_common(blocks, true);

  std::string target;
  auto* repro = app.add_subcommand("reproduce", "Regenerate result tables");
  repro->add_option("target", target, "line|rectangle|counterexample|peskun-matrices|lemma1|lemma2|all")->required();
  add_common(repro, true);

  ExampleArgs example_args;
  auto* example = app.add_subcommand("example", "Write a named example chain as JSON");
  example->add_option("name", example_args.name,
                      "line|rectangle|counterexample-old|counterexample-new|counterexample-pair|"
                      "peskun-T|peskun-middle|peskun-T-new|random|random-pair")
      ->required();
  example->add_option("--N", example_args.N, "Line length / rectangle width");
  example->add_option("--M", example_args.M, "Rectangle height");
  example->add_option("--states", example_args.states, "States for random chains");
  example->add_option("--delta", example_args.delta, "Counterexample delta");
  example->add_option("--density", example_args.density, "Edge density for random chains");
  add_common(example, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (*analyze) return cmd_analyze(cfg);
    if (*lift) return cmd_lift(cfg, lift_args);
    if (*compare) return cmd_compare(cfg, compare_args);
    if (*blocks) return cmd_blocks(cfg, blocks_args);
    if (*repro) return cmd_reproduce(cfg, target);
    if (*example) return cmd_example(cfg, example_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
