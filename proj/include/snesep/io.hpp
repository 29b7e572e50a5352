#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "snesep/affinity.hpp"
#include "snesep/certify.hpp"
#include "snesep/core.hpp"
#include "snesep/datagen.hpp"
#include "snesep/kernels.hpp"
#include "snesep/optimizer.hpp"
#include "snesep/quality.hpp"

namespace snesep {

using json = nlohmann::ordered_json;

namespace detail {

/// Shortest representation that round-trips.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
    throw ValidationError(where + ": cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

inline void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

/// Reads `cluster,<prefix>0,...` CSV into labels and a coordinate matrix.
inline std::pair<Matrix, std::vector<ClusterId>> read_labeled_csv(const std::string& path,
                                                                  char prefix) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
  line = strip_cr(line);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "cluster") {
    throw ValidationError(path + ": header must start with 'cluster'");
  }
  const std::size_t dim = header.size() - 1;
  for (std::size_t c = 0; c < dim; ++c) {
    if (header[c + 1] != std::string(1, prefix) + std::to_string(c)) {
      throw ValidationError(path + ": unexpected header column '" + std::string(header[c + 1]) +
                            "'");
    }
  }
  std::vector<double> values;
  std::vector<ClusterId> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (cells.size() != dim + 1) {
      throw ValidationError(where + ": expected " + std::to_string(dim + 1) + " fields");
    }
    const double lab = parse_double(cells[0], where);
    if (lab != std::floor(lab) || lab < 0 || lab > 1e9) {
      throw ValidationError(where + ": cluster id must be a nonnegative integer");
    }
    labels.push_back(static_cast<ClusterId>(lab));
    for (std::size_t c = 0; c < dim; ++c) values.push_back(parse_double(cells[c + 1], where));
  }
  if (labels.empty()) throw ValidationError(path + ": no data rows");
  Matrix m(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(i, c) = values[static_cast<std::size_t>(i * m.cols() + c)];
    }
  }
  return {std::move(m), std::move(labels)};
}

inline void write_labeled_csv(const std::string& path, const Matrix& m,
                              const std::vector<ClusterId>& labels, char prefix) {
  auto out = open_out(path);
  out << "cluster";
  for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << prefix << c;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << labels[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << format_double(m(i, c));
    out << '\n';
  }
  finish(out, path);
}

}  // namespace detail

// Dataset CSV: header `cluster,c0,...,c{D-1}`, one row per point.
inline void write_dataset_csv(const std::string& path, const Dataset& ds) {
  detail::write_labeled_csv(path, ds.points(), ds.labels(), 'c');
}

inline Dataset read_dataset_csv(const std::string& path) {
  auto [m, labels] = detail::read_labeled_csv(path, 'c');
  return Dataset(std::move(m), std::move(labels));
}

// Embedding CSV: header `cluster,e0,...,e{d-1}`, rows aligned with the dataset.
inline void write_embedding_csv(const std::string& path, const Embedding& emb,
                                const std::vector<ClusterId>& labels) {
  detail::write_labeled_csv(path, emb.coords(), labels, 'e');
}

inline std::pair<Embedding, std::vector<ClusterId>> read_embedding_csv(const std::string& path) {
  auto [m, labels] = detail::read_labeled_csv(path, 'e');
  return {Embedding(std::move(m)), std::move(labels)};
}

inline void write_trace_csv(const std::string& path, const OptimizationTrace& t) {
  auto out = detail::open_out(path);
  out << "iter,loss,grad_norm\n";
  for (std::size_t i = 0; i < t.loss_history.size(); ++i) {
    out << i << ',' << detail::format_double(t.loss_history[i]) << ','
        << detail::format_double(t.grad_norm_history[i]) << '\n';
  }
  detail::finish(out, path);
}

inline void write_sweep_csv(const std::string& path, const SweepReport& rep) {
  auto out = detail::open_out(path);
  out << "c,seed,Q,mismatches,contiguous\n";
  for (const auto& r : rep.rows) {
    out << detail::format_double(r.target_c) << ',' << r.seed << ',' << detail::format_double(r.q)
        << ',' << r.mismatches << ',' << (r.contiguous ? "true" : "false") << '\n';
  }
  detail::finish(out, path);
}

inline void write_json(const std::string& path, const json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
  detail::finish(out, path);
}

inline json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
}

// JSON has no infinities; non-finite values are written as strings.
inline json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline json to_json(const SeparationCertificate& c) {
  return {{"max_diameter", num(c.max_diameter)},
          {"min_separation", num(c.min_separation)},
          {"threshold", num(c.threshold)},
          {"satisfied", c.satisfied}};
}

inline json to_json(const BoundReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"kind", c.upper ? "upper" : "lower"},
                      {"observed", num(c.observed)},
                      {"bound", num(c.bound)},
                      {"slack", num(c.slack())},
                      {"passed", c.passed}});
  }
  return {{"checks", checks}, {"all_passed", r.all_passed()}};
}

inline json to_json(const QualityReport& r) {
  json j = {{"q_exact", num(r.q_exact)},
            {"q_exact_center_excluded", num(r.q_exact_excl)},
            {"q_mc", r.mc_samples > 0 ? num(r.q_mc) : json(nullptr)},
            {"q_mc_stderr", r.mc_samples > 0 ? num(r.q_mc_stderr) : json(nullptr)},
            {"mc_samples", r.mc_samples},
            {"lemma_lower", num(r.lemma_lower)},
            {"lemma_perfect", num(r.lemma_perfect)},
            {"theorem_upper", num(r.theorem_upper)},
            {"mismatches", r.mismatches}};
  j["contiguous"] = r.contiguous ? json(*r.contiguous) : json(nullptr);
  return j;
}

inline json to_json(const OptimizationTrace& t) {
  return {{"iterations_run", t.iterations_run},
          {"converged", t.converged},
          {"degenerate", t.degenerate},
          {"best_iteration", t.best_iteration},
          {"initial_loss", t.loss_history.empty() ? json(nullptr) : num(t.loss_history.front())},
          {"best_loss", t.best_loss_history.empty() ? json(nullptr)
                                                    : num(t.best_loss_history.back())},
          {"final_grad_norm",
           t.grad_norm_history.empty() ? json(nullptr) : num(t.grad_norm_history.back())}};
}

inline json to_json(const OptimizerConfig& c) {
  return {{"method", to_string(c.method)},
          {"step_size", c.step_size},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"iterations", c.iterations},
          {"seed", c.seed},
          {"init_scale", c.init_scale},
          {"early_stop_grad_norm", c.early_stop_grad_norm}};
}

inline json to_json(const AdmissibilityEvidence& e) {
  return {{"monotone_ok", e.monotone_ok},
          {"minorant_ok", e.minorant_ok},
          {"minorant_worst_x", num(e.minorant_worst_x)},
          {"minorant_worst_slack", num(e.minorant_worst_slack)},
          {"summable_ok", e.summable_ok},
          {"partial_terms", e.partial_terms},
          {"partial_sum", num(e.partial_sum)},
          {"tail_bound", num(e.tail_bound)},
          {"tail_sum_upper", num(e.tail_sum_upper())},
          {"passed", e.passed()}};
}

inline json to_json(const KernelSpec& k) {
  return {{"name", k.name()},
          {"minorant_alpha", k.minorant_alpha},
          {"minorant_beta", k.minorant_beta},
          {"tail_sum_bound", k.tail_sum_bound}};
}

inline json to_json(const LatticeLossCertificate& c) {
  return {{"lhs", num(c.loss)}, {"rhs", num(c.bound)}, {"slack", num(c.slack())},
          {"passed", c.passed}};
}

inline json to_json(const ChainCertificate& c) {
  return {{"lhs", num(c.lhs)},
          {"rhs", num(c.rhs)},
          {"slack", num(c.slack())},
          {"passed", c.passed},
          {"inclusive", {{"lhs", num(c.lhs_inclusive)},
                         {"rhs", num(c.rhs)},
                         {"slack", num(c.slack_inclusive())},
                         {"passed", c.inclusive_passed}}}};
}

inline json to_json(const ChainSummary& s) {
  return {{"evaluated", s.evaluated},
          {"failures", s.failures},
          {"worst_slack", num(s.worst_slack)},
          {"inclusive_failures", s.inclusive_failures},
          {"worst_slack_inclusive", num(s.worst_slack_inclusive)}};
}

inline json to_json(const TheoremCertificate& c) {
  return {{"lhs", num(c.lhs)},
          {"rhs", num(c.rhs)},
          {"slack", num(c.rhs - c.lhs)},
          {"passed", c.passed},
          {"improved", {{"lhs", num(c.lhs)},
                        {"rhs", num(c.improved_rhs)},
                        {"slack", num(c.improved_rhs - c.lhs)},
                        {"holds", c.improved_holds},
                        {"informational", true}}}};
}

inline json to_json(const GeneralKernelReport& r) {
  return {{"admissibility", to_json(r.admissibility)},
          {"lattice_loss", num(r.lattice_loss)},
          {"measured_constant", num(r.ratio)},
          {"ball_checks", r.ball_checks},
          {"ball_failures", r.ball_failures},
          {"worst_ball_slack", num(r.worst_ball_slack)},
          {"passed", r.passed}};
}

inline json to_json(const CertificateReport& r) {
  json j = {{"separation", to_json(r.separation)},
            {"p_bounds", to_json(r.p_bounds)},
            {"lattice_loss", to_json(r.lattice)}};
  j["lattice_loss_grid"] = r.lattice_grid ? to_json(*r.lattice_grid) : json(nullptr);
  j["chain_optimized"] = to_json(r.chain_optimized);
  j["chain_perfect"] = to_json(r.chain_perfect);
  j["chain_random"] = to_json(r.chain_random);
  j["theorem"] = to_json(r.theorem);
  j["kernel"] = to_json(r.kernel);
  j["all_passed"] = r.all_passed;
  return j;
}

inline json to_json(const SweepReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"c", num(row.target_c)},
                    {"measured_c", num(row.measured_c)},
                    {"seed", row.seed},
                    {"Q", num(row.q)},
                    {"mismatches", row.mismatches},
                    {"contiguous", row.contiguous},
                    {"final_loss", num(row.final_loss)}});
  }
  json summary = json::array();
  for (const auto& s : r.summary) {
    summary.push_back({{"c", num(s.target_c)},
                       {"mean_measured_c", num(s.mean_measured_c)},
                       {"mean_Q", num(s.mean_q)},
                       {"mean_mismatches", num(s.mean_mismatches)},
                       {"contiguous_fraction", num(s.contiguous_fraction)},
                       {"runs", s.runs}});
  }
  return {{"summary", summary}, {"rows", rows}};
}

}  // namespace snesep
