// sjd: command-line front end for the speculative Jacobi decoding harness.
//
//   sjd generate         --config run.json [--decode.window 8 ...]
//   sjd verify-lossless  --config run.json
//   sjd coupling-stats   --pairs 50 --vocab 8 --trials 100000
//   sjd sweep            --config run.json --axis L --values 4,8,16,32
//
// Every field of the JSON config can be overridden with a flag named after its
// dotted path. Exit codes: 0 ok, 1 test failure, 2 configuration error,
// 3 I/O error.

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sjd/fault.hpp"
#include "sjd/harness.hpp"

namespace {

using sjd::harness::json;
namespace h = sjd::harness;

const std::vector<std::string> kFieldPaths = {
    "model.vocab_size",  "model.context_order", "model.flatness",    "model.seed",
    "model.max_length",  "model.uncond.kind",   "model.uncond.seed", "sampling.temperature",
    "sampling.top_k",    "sampling.top_p",      "sampling.cfg_scale", "decode.length",
    "decode.window",     "decode.coupler",      "decode.rejection",  "run.trials",
    "run.seed",          "run.threads",         "output.format",     "output.path",
    "sweep.axis",        "sweep.values"};

struct ExperimentFlags {
  std::string config_path;
  std::map<std::string, std::string> fields;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
  std::string format;
  bool timing = false;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment configuration");
  cmd->add_option("--seed", f.seed, "master seed (run.seed)");
  cmd->add_option("--threads", f.threads, "worker threads (run.threads)");
  cmd->add_option("--out", f.out, "output path, '-' for stdout (output.path)");
  cmd->add_option("--format", f.format, "csv or report (output.format)")
      ->check(CLI::IsMember({"csv", "report"}));
  cmd->add_flag("--timing", f.timing, "emit wall time in aggregate rows");
  auto* group = cmd->add_option_group("Config fields");
  for (const auto& path : kFieldPaths)
    group->add_option_function<std::string>(
        "--" + path, [&f, path](const std::string& v) { f.fields[path] = v; }, "override " + path);
}

h::ExperimentConfig resolve(const ExperimentFlags& f, json base, const std::string& default_format) {
  base["output"]["format"] = default_format;
  if (!f.config_path.empty()) base.merge_patch(h::load_config_json(f.config_path));
  for (const auto& path : kFieldPaths) {
    auto it = f.fields.find(path);
    if (it == f.fields.end()) continue;
    if (path == "sweep.values") {
      json arr = json::array();
      std::size_t start = 0;
      const std::string& s = it->second;
      while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const std::string item = s.substr(start, comma == std::string::npos ? comma : comma - start);
        try {
          arr.push_back(json::parse(item));
        } catch (const json::parse_error&) {
          arr.push_back(item);
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      base["sweep"]["values"] = arr;
    } else {
      h::apply_override(base, path, it->second);
    }
  }
  if (f.seed) base["run"]["seed"] = *f.seed;
  if (f.threads) base["run"]["threads"] = *f.threads;
  if (!f.out.empty()) base["output"]["path"] = f.out;
  if (!f.format.empty()) base["output"]["format"] = f.format;
  if (f.timing) base["output"]["timing"] = true;
  return h::config_from_json(base);
}

json desk_scale_defaults() {
  return {{"model", {{"vocab_size", 4}, {"context_order", 1}, {"flatness", 2.0}, {"seed", 1}}},
          {"decode", {{"length", 5}, {"window", 4}}},
          {"run", {{"trials", 200000}, {"seed", 0}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speculative Jacobi decoding with draft coupling: runs, checks, sweeps"};
  app.require_subcommand(1);

  ExperimentFlags gen_flags, verify_flags, sweep_flags;
  auto* gen = app.add_subcommand("generate", "run decodes and write per-trial and aggregate rows");
  add_experiment_flags(gen, gen_flags);

  auto* verify = app.add_subcommand("verify-lossless",
                                    "check vanilla and every coupler against the exact sequence law");
  add_experiment_flags(verify, verify_flags);
  std::string fault;
  verify->add_option("--inject-fault", fault, "test fixture: break the verifier on purpose")
      ->check(CLI::IsMember({"skip-residual"}))
      ->group("Testing");

  auto* sweep = app.add_subcommand("sweep", "aggregate rows over one config axis");
  add_experiment_flags(sweep, sweep_flags);
  sweep->add_option_function<std::string>(
      "--axis", [&](const std::string& v) { sweep_flags.fields["sweep.axis"] = v; },
      "L, cfg_scale, flatness or coupler");
  sweep->add_option_function<std::string>(
      "--values", [&](const std::string& v) { sweep_flags.fields["sweep.values"] = v; },
      "comma-separated axis values");

  h::CouplingStatsOptions cs;
  std::string cs_out = "-";
  std::string cs_format = "csv";
  auto* coupling = app.add_subcommand("coupling-stats", "collision statistics of the three couplings");
  coupling->add_option("--pairs", cs.pairs, "number of distribution pairs")->capture_default_str();
  coupling->add_option("--vocab", cs.vocab, "vocabulary size")->capture_default_str();
  coupling->add_option("--entropy-min", cs.scale_min, "smallest logit scale (flattest pairs)")
      ->capture_default_str();
  coupling->add_option("--entropy-max", cs.scale_max, "largest logit scale (sharpest pairs)")
      ->capture_default_str();
  coupling->add_option("--trials", cs.trials, "Monte Carlo trials per pair")->capture_default_str();
  coupling->add_option("--pair-kind", cs.pair_kind, "random, identical or uniform")
      ->check(CLI::IsMember({"random", "identical", "uniform"}))
      ->capture_default_str();
  coupling->add_option("--seed", cs.seed, "master seed")->capture_default_str();
  coupling->add_option("--out", cs_out, "output path, '-' for stdout");
  coupling->add_option("--format", cs_format, "csv or report")->check(CLI::IsMember({"csv", "report"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? h::kExitOk : h::kExitConfigError;
  }

  try {
    if (gen->parsed()) {
      const auto cfg = resolve(gen_flags, json::object(), "csv");
      h::emit(h::render(h::cmd_generate(cfg), cfg.output.format), cfg.output.path);
      return h::kExitOk;
    }
    if (verify->parsed()) {
      const auto cfg = resolve(verify_flags, desk_scale_defaults(), "report");
      const auto outcome = fault == "skip-residual"
                               ? h::cmd_verify_lossless(cfg, sjd::fault::SkipResidual{})
                               : h::cmd_verify_lossless(cfg);
      h::emit(h::render(h::reports_table(outcome.reports, cfg.run.seed, h::fingerprint(cfg)),
                        cfg.output.format),
              cfg.output.path);
      return outcome.pass ? h::kExitOk : h::kExitTestFailure;
    }
    if (sweep->parsed()) {
      const auto cfg = resolve(sweep_flags, json::object(), "csv");
      if (!cfg.sweep) throw h::ConfigError("sweep", "need --axis and --values (or a sweep section)");
      h::emit(h::render(h::cmd_sweep(cfg, cfg.sweep->axis, cfg.sweep->values), cfg.output.format),
              cfg.output.path);
      return h::kExitOk;
    }
    if (coupling->parsed()) {
      h::emit(h::render(h::cmd_coupling_stats(cs), cs_format), cs_out);
      return h::kExitOk;
    }
  } catch (const h::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return h::kExitIoError;
  } catch (const h::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return h::kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return h::kExitConfigError;
  } catch (const std::length_error& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return h::kExitConfigError;
  } catch (const std::domain_error& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return h::kExitConfigError;
  }
  return h::kExitConfigError;
}
