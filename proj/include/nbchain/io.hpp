#pragma once

// JSON/CSV serialization for chains, variance reports, comparison reports and
// block traces.

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nbchain/chain.hpp"
#include "nbchain/no_backtrack.hpp"
#include "nbchain/peskun_blocks.hpp"
#include "nbchain/variance.hpp"

namespace nbchain {

using Json = nlohmann::json;

/// Contents of a chain file: {"states", "T", "pi"?, "f"?}.
struct ChainFile {
  FiniteChain chain;
  std::optional<Distribution> dist;
  std::optional<StateFunction> f;
};

inline Json matrix_to_json(const Matrix& M) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Json chain_to_json(const FiniteChain& chain, const Distribution* dist = nullptr, const StateFunction* f = nullptr) {
  Json j;
  j["states"] = chain.labels();
  j["T"] = matrix_to_json(chain.matrix());
  if (dist) j["pi"] = vector_to_json(dist->probabilities());
  if (f) j["f"] = vector_to_json(f->values());
  return j;
}

namespace detail {

inline Vector json_vector(const Json& j, std::size_t expected, const char* field) {
  if (!j.is_array() || j.size() != expected) {
    throw Error(ErrorKind::ParseError, std::string("\"") + field + "\" must be an array of " + std::to_string(expected) + " numbers");
  }
  Vector v(static_cast<Eigen::Index>(expected));
  for (std::size_t i = 0; i < expected; ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::ParseError, std::string("non-numeric entry in \"") + field + "\"");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

}  // namespace detail

inline ChainFile chain_from_json(const Json& j, double tol = kTolStochastic) {
  if (!j.is_object() || !j.contains("T")) throw Error(ErrorKind::ParseError, "chain file needs a \"T\" matrix");
  const Json& rows = j["T"];
  if (!rows.is_array() || rows.empty()) throw Error(ErrorKind::ParseError, "\"T\" must be a non-empty array of rows");
  const std::size_t n = rows.size();
  Matrix T(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    if (!rows[r].is_array()) throw Error(ErrorKind::ParseError, "row " + std::to_string(r) + " is not an array");
    if (rows[r].size() != n) {
      throw Error(ErrorKind::NotSquare, "row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) + " entries, expected " + std::to_string(n));
    }
    T.row(static_cast<Eigen::Index>(r)) = detail::json_vector(rows[r], n, "T").transpose();
  }
  std::vector<std::string> labels;
  if (j.contains("states")) {
    if (!j["states"].is_array()) throw Error(ErrorKind::ParseError, "\"states\" must be an array");
    for (const auto& s : j["states"]) labels.push_back(s.is_string() ? s.get<std::string>() : s.dump());
  }
  ChainFile file{validate_chain(T, tol, labels), std::nullopt, std::nullopt};
  if (j.contains("pi")) file.dist = Distribution(detail::json_vector(j["pi"], n, "pi"), tol);
  if (j.contains("f")) file.f = StateFunction(detail::json_vector(j["f"], n, "f"));
  return file;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
}

inline ChainFile read_chain_file(const std::string& path, double tol = kTolStochastic) {
  return chain_from_json(read_json_file(path), tol);
}

/// Write text to `path` through a temporary file renamed into place.
inline void write_text_file(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::ParseError, "cannot write " + path);
    out << text;
    if (!out) throw Error(ErrorKind::ParseError, "write failed for " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error(ErrorKind::ParseError, "cannot move " + tmp + " to " + path);
}

/// Pair index -> base states, for a lifted chain written with "(x|y)" labels.
inline Json pair_provenance_json(const ExpandedChain& expanded) {
  Json pairs = Json::array();
  for (std::size_t k = 0; k < expanded.size(); ++k) {
    const auto& p = expanded.pair(k);
    pairs.push_back({{"index", k},
                     {"label", expanded.chain().label(k)},
                     {"first", expanded.base().label(p.first)},
                     {"second", expanded.base().label(p.second)}});
  }
  return Json{{"base_states", expanded.base().labels()}, {"pairs", std::move(pairs)}};
}

inline Json to_json(const VarianceReport& r) {
  return {{"exact", r.exact}, {"empirical", r.empirical}, {"stderr", r.empirical_stderr},
          {"n", r.n},         {"reps", r.reps},           {"seed", r.seed}};
}

inline Json to_json(const ComparisonReport& r) {
  return {{"old", {{"est", r.old_est.est}, {"stderr", r.old_est.stderr_}}},
          {"new", {{"est", r.new_est.est}, {"stderr", r.new_est.stderr_}}},
          {"z", r.z},
          {"pass", r.pass},
          {"n", r.n},
          {"reps", r.reps},
          {"seed", r.seed}};
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// One row per complete block: type,H,L.
inline std::string blocks_csv(const BlockTrace& trace) {
  std::ostringstream os;
  os << "type,H,L\n";
  for (const auto& b : trace.blocks) os << to_string(b.type) << ',' << format_double(b.H) << ',' << b.L << '\n';
  return os.str();
}

inline Json to_json(const BlockStatistics& s) {
  Json by_type = Json::object();
  for (const BlockType t : {BlockType::AA, BlockType::AB, BlockType::BA, BlockType::BB}) {
    const auto& st = s[t];
    by_type[to_string(t)] = {{"count", st.count}, {"mean_H", st.mean_H}, {"var_H", st.var_H},
                             {"mean_L", st.mean_L}, {"var_L", st.var_L}};
  }
  return {{"blocks", s.total}, {"by_type", std::move(by_type)}, {"homogeneous_fraction", s.homogeneous_fraction()},
          {"ratio_estimate", s.ratio_estimate}};
}

}  // namespace nbchain
