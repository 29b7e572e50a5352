// snesep: command-line driver for the SNE separation lab.
//
// Exit codes: 0 success, 2 validation or precondition failure (including
// usage errors), 3 I/O failure, 4 numerical divergence, 5 certificate failure.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snesep/snesep.hpp"

namespace {

using snesep::json;

enum ExitCode : int {
  kOk = 0,
  kValidation = 2,
  kIo = 3,
  kDivergence = 4,
  kCertificateFailed = 5,
};

// JSON config files. Keys are long option names of the chosen command
// (`step-size` or `step_size`); a nested object named after that command is
// applied on top, and sections for other commands are ignored so one file can
// drive several commands.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* app) : app_(app) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError("config: invalid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw CLI::ConversionError("config: top level must be an object");
    const auto chosen = app_->get_subcommands();
    if (chosen.empty()) return {};
    const std::string command = chosen.front()->get_name();
    std::vector<CLI::ConfigItem> items;
    add_items(j, command, items);
    if (j.contains(command) && j[command].is_object()) add_items(j[command], command, items);
    return items;
  }

 private:
  void add_items(const json& obj, const std::string& command,
                 std::vector<CLI::ConfigItem>& items) const {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        if (app_->get_subcommand_no_throw(key) != nullptr) continue;
        throw CLI::ConversionError("config: unexpected section '" + key + "'");
      }
      CLI::ConfigItem item;
      item.parents = {command};
      item.name = key;
      std::replace(item.name.begin(), item.name.end(), '_', '-');
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }

  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  }

  const CLI::App* app_;
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json typed_value(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (!s.empty() && res.ec == std::errc() && res.ptr == s.data() + s.size()) {
    const json parsed = json::parse(s, nullptr, false);
    if (!parsed.is_discarded()) return parsed;
  }
  return s;
}

/// Every option of `cmd` with the value in effect after command line, config
/// and environment have been applied.
json effective_config(const CLI::App& cmd) {
  json j = json::object();
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    std::vector<std::string> vals = opt->results();
    if (opt->count() == 0) {
      const std::string def = opt->get_default_str();
      vals.clear();
      if (!def.empty() && def != "[]") vals.push_back(def);
    }
    if (opt->get_expected_max() > 1) {
      json arr = json::array();
      for (const auto& v : vals) arr.push_back(typed_value(v));
      j[name] = arr;
    } else if (vals.empty()) {
      j[name] = nullptr;
    } else {
      j[name] = typed_value(vals.back());
    }
  }
  return j;
}

json make_report(const CLI::App& cmd) {
  const json cfg = effective_config(cmd);
  json r;
  r["metadata"] = {{"tool", "snesep"},
                   {"version", snesep::kVersion},
                   {"command", cmd.get_name()},
                   {"config_hash", "fnv1a64:" + hex64(fnv1a(cmd.get_name() + cfg.dump()))},
                   {"timestamp", utc_timestamp()}};
  r["config"] = cfg;
  return r;
}

void emit(const json& report, const std::string& path) {
  if (path.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    snesep::write_json(path, report);
  }
}

void require_input(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw snesep::IoError("input file '" + path + "' does not exist");
  }
}

void require_output(const std::string& path) {
  if (path.empty()) return;
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw snesep::IoError("output directory '" + parent.string() + "' does not exist");
  }
}

// CLI11 renders default doubles with six significant digits; echo them
// exactly instead.
CLI::Option* add_real(CLI::App* cmd, const std::string& name, double& v, const std::string& help) {
  return cmd->add_option(name, v, help)->default_str(snesep::detail::format_double(v));
}

json dataset_json(const snesep::Dataset& ds) {
  return {{"k", ds.k()}, {"n", ds.n()}, {"a", ds.a()}, {"dim", ds.dim()}};
}

struct OptimizerFlags {
  std::string method = "adam";
  snesep::OptimizerConfig cfg;

  void add(CLI::App* cmd) {
    cmd->add_option("--method", method, "adam or gd_momentum")
        ->check(CLI::IsMember({"adam", "gd_momentum"}));
    add_real(cmd, "--step-size", cfg.step_size, "Optimizer step size");
    add_real(cmd, "--beta1", cfg.beta1, "Adam first-moment decay (momentum for gd_momentum)");
    add_real(cmd, "--beta2", cfg.beta2, "Adam second-moment decay");
    add_real(cmd, "--epsilon", cfg.epsilon, "Adam denominator guard");
    cmd->add_option("--iterations", cfg.iterations, "Iteration budget");
    add_real(cmd, "--init-scale", cfg.init_scale, "Std-dev of the initial embedding");
    add_real(cmd, "--early-stop-grad-norm", cfg.early_stop_grad_norm,
             "Stop once the gradient norm falls to this value");
  }

  snesep::OptimizerConfig resolve(std::uint64_t seed) const {
    snesep::OptimizerConfig c = cfg;
    c.method = snesep::parse_method(method);
    c.seed = seed;
    c.validate();
    return c;
  }
};

snesep::GeneratorSpec small_spec() {
  snesep::GeneratorSpec s;
  s.a = 20;
  s.dim = 20;
  return s;
}

struct Options {
  std::string report;

  // generate
  snesep::GeneratorSpec gen;
  std::string mode = "satisfy";
  std::string shape = "gaussian_clipped";
  std::uint64_t seed = 0;
  std::string output;

  // embed / quality / certify / perfect
  std::string data;
  std::string embedding;
  std::string trace;
  std::size_t d = 1;
  std::string kernel = "gaussian";
  double sigma = snesep::kTheoremSigma;
  std::size_t mc_samples = 10000;
  std::size_t random_embeddings = 100;
  OptimizerFlags opt;

  // sweep
  snesep::GeneratorSpec sweep_gen = small_spec();
  std::vector<double> targets;
  std::vector<std::uint64_t> seeds;
  std::size_t threads = 0;
};

snesep::MinimizeResult run_minimize(const snesep::AffinityMatrix& p, std::size_t k,
                                    const snesep::KernelSpec& kern, const Options& o,
                                    const std::string& trace_path) {
  const snesep::OptimizerConfig cfg = o.opt.resolve(o.seed);
  const snesep::Embedding init = snesep::init_embedding(k, o.d, cfg.init_scale, o.seed);
  try {
    auto res = snesep::minimize(p, init, kern, cfg);
    if (!trace_path.empty()) snesep::write_trace_csv(trace_path, res.trace);
    return res;
  } catch (const snesep::DivergenceError& e) {
    if (!trace_path.empty()) snesep::write_trace_csv(trace_path, e.trace);
    throw;
  }
}

int cmd_generate(const CLI::App& cmd, Options& o) {
  require_output(o.output);
  require_output(o.report);
  snesep::GeneratorSpec spec = o.gen;
  spec.mode = o.mode == "target" ? snesep::GeneratorMode::target : snesep::GeneratorMode::satisfy;
  spec.shape = snesep::parse_shape(o.shape);
  spec.seed = o.seed;
  const snesep::Dataset ds = snesep::generate(spec);
  snesep::write_dataset_csv(o.output, ds);

  json r = make_report(cmd);
  r["dataset"] = dataset_json(ds);
  r["separation"] = snesep::to_json(snesep::validate_dataset(ds, snesep::separation_threshold(ds.n())));
  emit(r, o.report);
  return kOk;
}

int cmd_embed(const CLI::App& cmd, Options& o) {
  require_input(o.data);
  require_output(o.embedding);
  require_output(o.trace);
  require_output(o.report);
  const snesep::Dataset ds = snesep::read_dataset_csv(o.data);
  const snesep::KernelSpec kern = snesep::parse_kernel(o.kernel);
  const auto p = snesep::input_affinities(ds, snesep::uniform_scales(ds.k(), o.sigma));
  const auto res = run_minimize(p, ds.k(), kern, o, o.trace);
  snesep::write_embedding_csv(o.embedding, res.embedding, ds.labels());

  json r = make_report(cmd);
  r["dataset"] = dataset_json(ds);
  r["separation"] = snesep::to_json(snesep::validate_dataset(ds, snesep::separation_threshold(ds.n())));
  r["kernel"] = snesep::to_json(kern);
  r["optimizer"] = snesep::to_json(res.trace);
  r["quality"] = snesep::to_json(snesep::make_quality_report(res.embedding, ds, o.mc_samples, o.seed));
  emit(r, o.report);
  return kOk;
}

snesep::Embedding read_matching_embedding(const std::string& path, const snesep::Dataset& ds) {
  require_input(path);
  auto [emb, labels] = snesep::read_embedding_csv(path);
  snesep::require_matching(emb, ds, "embedding file");
  if (labels != ds.labels()) {
    throw snesep::ValidationError("embedding file: cluster column does not match the dataset");
  }
  return emb;
}

int cmd_quality(const CLI::App& cmd, Options& o) {
  require_input(o.data);
  require_output(o.report);
  const snesep::Dataset ds = snesep::read_dataset_csv(o.data);
  const snesep::Embedding emb = read_matching_embedding(o.embedding, ds);
  json r = make_report(cmd);
  r["dataset"] = dataset_json(ds);
  r["quality"] = snesep::to_json(snesep::make_quality_report(emb, ds, o.mc_samples, o.seed));
  emit(r, o.report);
  return kOk;
}

int cmd_certify(const CLI::App& cmd, Options& o) {
  require_input(o.data);
  require_output(o.report);
  const snesep::Dataset ds = snesep::read_dataset_csv(o.data);
  json r = make_report(cmd);
  r["dataset"] = dataset_json(ds);
  const auto sep = snesep::validate_dataset(ds, snesep::separation_threshold(ds.n()));
  if (!sep.satisfied) {
    r["separation"] = snesep::to_json(sep);
    r["error"] = "dataset violates the separation hypotheses";
    emit(r, o.report);
    std::cerr << "snesep certify: dataset violates the separation hypotheses (max_diameter="
              << sep.max_diameter << ", min_separation=" << sep.min_separation
              << ", threshold=" << sep.threshold << ")\n";
    return kValidation;
  }

  const snesep::KernelSpec kern = snesep::parse_kernel(o.kernel);
  snesep::Embedding optimized;
  if (!o.embedding.empty()) {
    optimized = read_matching_embedding(o.embedding, ds);
    r["optimized_source"] = o.embedding;
  } else {
    const auto res = run_minimize(snesep::theorem_affinities(ds), ds.k(),
                                  snesep::KernelSpec::gaussian(), o, o.trace);
    optimized = res.embedding;
    r["optimized_source"] = "optimizer";
    r["optimizer"] = snesep::to_json(res.trace);
  }

  snesep::CertificateOptions copt;
  copt.d = optimized.d();
  copt.random_embeddings = o.random_embeddings;
  copt.seed = o.seed;
  copt.kernel = kern;
  const auto rep = snesep::certify_all(ds, optimized, copt);
  r["certificates"] = snesep::to_json(rep);
  r["relaxed_threshold"] = snesep::num(snesep::relaxed_threshold(ds.n(), copt.d));
  emit(r, o.report);
  if (!rep.all_passed) {
    std::cerr << "snesep certify: at least one hard certificate failed\n";
    return kCertificateFailed;
  }
  return kOk;
}

int cmd_sweep(const CLI::App& cmd, Options& o) {
  require_output(o.output);
  require_output(o.report);
  snesep::GeneratorSpec base = o.sweep_gen;
  base.shape = snesep::parse_shape(o.shape);
  const snesep::KernelSpec kern = snesep::parse_kernel(o.kernel);
  snesep::SweepOptions sopt;
  sopt.d = o.d;
  sopt.sigma = o.sigma;
  sopt.threads = snesep::resolve_threads(o.threads);
  const auto rep =
      snesep::separation_sweep(base, o.targets, o.seeds, o.opt.resolve(0), kern, sopt);
  snesep::write_sweep_csv(o.output, rep);
  json r = make_report(cmd);
  r["kernel"] = snesep::to_json(kern);
  r["sweep"] = snesep::to_json(rep);
  emit(r, o.report);
  return kOk;
}

int cmd_perfect(const CLI::App& cmd, Options& o) {
  require_input(o.data);
  require_output(o.output);
  require_output(o.report);
  const snesep::Dataset ds = snesep::read_dataset_csv(o.data);
  const snesep::Embedding emb = snesep::perfect_embedding(ds);
  snesep::write_embedding_csv(o.output, emb, ds.labels());
  json r = make_report(cmd);
  r["dataset"] = dataset_json(ds);
  r["quality"] = snesep::to_json(snesep::make_quality_report(emb, ds, 0, 0));
  emit(r, o.report);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic neighbor embedding of clustered data, with quality scores and "
               "numeric certificates"};
  app.set_version_flag("--version", std::string("snesep ") + snesep::kVersion);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.set_config("--config", "", "JSON file with option values for the chosen command");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();

  Options o;
  auto add_cmd = [&](const std::string& name, const std::string& help) {
    CLI::App* c = app.add_subcommand(name, help);
    c->add_option("--report", o.report, "Write the JSON report here instead of stdout");
    return c;
  };
  auto add_seed = [&](CLI::App* c) {
    c->add_option("--seed", o.seed, "Random seed (required)")->required();
  };
  auto add_kernel = [&](CLI::App* c) {
    c->add_option("--kernel", o.kernel, "gaussian, cauchy or exp:<alpha>");
  };

  CLI::App* gen = add_cmd("generate", "Synthesize a clustered dataset");
  gen->add_option("--n", o.gen.n, "Number of clusters");
  gen->add_option("--a", o.gen.a, "Points per cluster");
  gen->add_option("--dim", o.gen.dim, "Input dimension");
  add_real(gen, "--margin", o.gen.margin, "Multiplier on the separation threshold");
  gen->add_option("--mode", o.mode, "satisfy or target")
      ->check(CLI::IsMember({"satisfy", "target"}));
  add_real(gen, "--target-c", o.gen.target_c, "Minimum separation in target mode");
  gen->add_option("--shape", o.shape, "uniform_ball or gaussian_clipped");
  add_seed(gen);
  gen->add_option("-o,--output", o.output, "Dataset CSV")->required();

  CLI::App* emb = add_cmd("embed", "Minimize the SNE loss and score the result");
  emb->add_option("--data", o.data, "Dataset CSV")->required();
  emb->add_option("--embedding,-o", o.embedding, "Embedding CSV to write")->required();
  emb->add_option("--trace", o.trace, "Optimizer trace CSV");
  emb->add_option("--d", o.d, "Output dimension");
  add_kernel(emb);
  add_real(emb, "--sigma", o.sigma, "Input bandwidth");
  emb->add_option("--mc-samples", o.mc_samples, "Monte-Carlo samples for Q");
  o.opt.add(emb);
  add_seed(emb);

  CLI::App* qual = add_cmd("quality", "Score an existing embedding");
  qual->add_option("--data", o.data, "Dataset CSV")->required();
  qual->add_option("--embedding", o.embedding, "Embedding CSV")->required();
  qual->add_option("--mc-samples", o.mc_samples, "Monte-Carlo samples for Q");
  add_seed(qual);

  CLI::App* cert = add_cmd("certify", "Evaluate the separation certificate chain");
  cert->add_option("--data", o.data, "Dataset CSV")->required();
  cert->add_option("--embedding", o.embedding, "Optimized embedding (default: run the optimizer)");
  cert->add_option("--trace", o.trace, "Optimizer trace CSV");
  cert->add_option("--d", o.d, "Output dimension");
  add_kernel(cert);
  cert->add_option("--random-embeddings", o.random_embeddings,
                   "Random embeddings for the any-embedding check");
  o.opt.add(cert);
  add_seed(cert);

  CLI::App* sweep = add_cmd("sweep", "Embed datasets across a range of separations");
  sweep->add_option("--n", o.sweep_gen.n, "Number of clusters");
  sweep->add_option("--a", o.sweep_gen.a, "Points per cluster");
  sweep->add_option("--dim", o.sweep_gen.dim, "Input dimension");
  sweep->add_option("--shape", o.shape, "uniform_ball or gaussian_clipped");
  sweep->add_option("--targets", o.targets, "Target separations")->required();
  sweep->add_option("--seeds", o.seeds, "Seeds, one run per target and seed")->required();
  sweep->add_option("-o,--output", o.output, "Sweep CSV")->required();
  sweep->add_option("--d", o.d, "Output dimension");
  add_kernel(sweep);
  add_real(sweep, "--sigma", o.sigma, "Input bandwidth");
  sweep->add_option("--threads", o.threads, "Worker cap")->envname("SNESEP_THREADS");
  o.opt.add(sweep);

  CLI::App* perf = add_cmd("perfect", "Write the minimal-Q witness embedding");
  perf->add_option("--data", o.data, "Dataset CSV")->required();
  perf->add_option("-o,--output", o.output, "Embedding CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::FileError& e) {
    std::cerr << "snesep: " << e.what() << '\n';
    return kIo;
  } catch (const CLI::ParseError& e) {
    std::cerr << "snesep: " << e.what() << "\nRun with --help for usage.\n";
    return kValidation;
  }

  try {
    const CLI::App* cmd = app.get_subcommands().front();
    const std::string& name = cmd->get_name();
    if (name == "generate") return cmd_generate(*cmd, o);
    if (name == "embed") return cmd_embed(*cmd, o);
    if (name == "quality") return cmd_quality(*cmd, o);
    if (name == "certify") return cmd_certify(*cmd, o);
    if (name == "sweep") return cmd_sweep(*cmd, o);
    return cmd_perfect(*cmd, o);
  } catch (const snesep::IoError& e) {
    std::cerr << "snesep: I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const snesep::NumericalError& e) {
    std::cerr << "snesep: numerical failure: " << e.what() << '\n';
    return kDivergence;
  } catch (const snesep::Error& e) {
    std::cerr << "snesep: " << e.what() << '\n';
    return kValidation;
  }
}
