#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sjd/decoder.hpp"
#include "sjd/model.hpp"
#include "sjd/oracle.hpp"
#include "sjd/parallel.hpp"

namespace sjd::harness {

using json = nlohmann::json;

// Invalid configuration; `field` is the dotted path of the offending value.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { kExitOk = 0, kExitTestFailure = 1, kExitConfigError = 2, kExitIoError = 3 };

struct DecodeSection {
  std::size_t length = 16;
  std::size_t window = 4;
  std::string coupler = "maximal";  // vanilla | independent | maximal | gumbel
  RejectionMode rejection = RejectionMode::FinalizeResidual;
};

struct RunSection {
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct OutputSection {
  std::string format = "csv";  // csv | report
  std::string path = "-";
  bool timing = false;         // wall time breaks byte-identical output
};

struct SweepSection {
  std::string axis;  // L | cfg_scale | flatness | coupler
  std::vector<json> values;
};

struct ExperimentConfig {
  ModelSpec model;
  SamplingConfig sampling;
  DecodeSection decode;
  RunSection run;
  OutputSection output;
  std::optional<SweepSection> sweep;

  bool is_vanilla() const { return decode.coupler == "vanilla"; }

  DecoderConfig decoder() const {
    DecoderConfig d;
    d.vanilla = is_vanilla();
    d.sampling = sampling;
    d.sjd.length = decode.length;
    d.sjd.window = decode.window;
    d.sjd.coupler = d.vanilla ? CouplerKind::Independent : *parse_coupler(decode.coupler);
    d.sjd.rejection = decode.rejection;
    return d;
  }
};

namespace detail {

inline void reject_unknown(const json& obj, const std::string& path,
                           std::initializer_list<std::string_view> known) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [k, v] : obj.items())
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ConfigError(path.empty() ? k : path + "." + k, "unknown field");
}

template <class T>
void read(const json& obj, const std::string& path, const char* key, T& out) {
  if (!obj.contains(key)) return;
  const std::string field = path + "." + key;
  const json& v = obj.at(key);
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        throw ConfigError(field, "expected a non-negative integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(field, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(field, "expected a string");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(field, "expected a boolean");
    }
    out = v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field, e.what());
  }
}

template <class T>
void read_optional(const json& obj, const std::string& path, const char* key,
                   std::optional<T>& out) {
  if (!obj.contains(key)) return;
  if (obj.at(key).is_null()) {
    out.reset();
    return;
  }
  T v{};
  read(obj, path, key, v);
  out = v;
}

inline void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  using detail::read;
  using detail::read_optional;
  using detail::require;
  ExperimentConfig c;
  detail::reject_unknown(j, "", {"model", "sampling", "decode", "run", "output", "sweep"});

  if (j.contains("model")) {
    const json& m = j["model"];
    detail::reject_unknown(m, "model",
                           {"vocab_size", "context_order", "flatness", "seed", "max_length", "uncond"});
    read(m, "model", "vocab_size", c.model.vocab_size);
    read(m, "model", "context_order", c.model.context_order);
    read(m, "model", "flatness", c.model.flatness);
    read(m, "model", "seed", c.model.seed);
    read(m, "model", "max_length", c.model.max_length);
    if (m.contains("uncond")) {
      const json& u = m["uncond"];
      detail::reject_unknown(u, "model.uncond", {"kind", "seed"});
      std::string kind = "tabular";
      read(u, "model.uncond", "kind", kind);
      require(kind == "tabular" || kind == "zero", "model.uncond.kind", "expected tabular|zero");
      c.model.uncond_kind = kind == "zero" ? UncondKind::Zero : UncondKind::Tabular;
      read_optional(u, "model.uncond", "seed", c.model.uncond_seed);
    }
  }
  if (j.contains("sampling")) {
    const json& s = j["sampling"];
    detail::reject_unknown(s, "sampling", {"temperature", "top_k", "top_p", "cfg_scale"});
    read(s, "sampling", "temperature", c.sampling.temperature);
    read_optional(s, "sampling", "top_k", c.sampling.top_k);
    read_optional(s, "sampling", "top_p", c.sampling.top_p);
    read(s, "sampling", "cfg_scale", c.sampling.cfg_scale);
  }
  if (j.contains("decode")) {
    const json& d = j["decode"];
    detail::reject_unknown(d, "decode", {"length", "window", "coupler", "rejection"});
    read(d, "decode", "length", c.decode.length);
    read(d, "decode", "window", c.decode.window);
    read(d, "decode", "coupler", c.decode.coupler);
    std::string rej = std::string(to_string(c.decode.rejection));
    read(d, "decode", "rejection", rej);
    const auto mode = parse_rejection(rej);
    require(mode.has_value(), "decode.rejection", "expected finalize|redraft");
    c.decode.rejection = *mode;
  }
  if (j.contains("run")) {
    const json& r = j["run"];
    detail::reject_unknown(r, "run", {"trials", "seed", "threads"});
    read(r, "run", "trials", c.run.trials);
    read(r, "run", "seed", c.run.seed);
    read(r, "run", "threads", c.run.threads);
  }
  if (j.contains("output")) {
    const json& o = j["output"];
    detail::reject_unknown(o, "output", {"format", "path", "timing"});
    read(o, "output", "format", c.output.format);
    read(o, "output", "path", c.output.path);
    read(o, "output", "timing", c.output.timing);
  }
  if (j.contains("sweep") && !j["sweep"].is_null()) {
    const json& s = j["sweep"];
    detail::reject_unknown(s, "sweep", {"axis", "values"});
    SweepSection sw;
    read(s, "sweep", "axis", sw.axis);
    if (s.contains("values")) {
      require(s["values"].is_array(), "sweep.values", "expected an array");
      sw.values.assign(s["values"].begin(), s["values"].end());
    }
    c.sweep = std::move(sw);
  }

  require(c.model.vocab_size >= 1, "model.vocab_size", "must be >= 1");
  require(c.model.flatness > 0.0, "model.flatness", "must be > 0");
  require(c.model.max_length >= 1, "model.max_length", "must be >= 1");
  require(c.sampling.temperature > 0.0, "sampling.temperature", "must be > 0");
  require(!c.sampling.top_k || (*c.sampling.top_k >= 1 && *c.sampling.top_k <= c.model.vocab_size),
          "sampling.top_k", "must lie in [1, vocab_size]");
  require(!c.sampling.top_p || (*c.sampling.top_p > 0.0 && *c.sampling.top_p <= 1.0),
          "sampling.top_p", "must lie in (0, 1]");
  require(c.sampling.cfg_scale >= 0.0, "sampling.cfg_scale", "must be >= 0");
  require(c.decode.coupler == "vanilla" || parse_coupler(c.decode.coupler).has_value(),
          "decode.coupler", "expected vanilla|independent|maximal|gumbel");
  require(c.decode.window >= 1, "decode.window", "must be >= 1");
  require(c.decode.length <= c.model.max_length, "decode.length", "must be <= model.max_length");
  require(c.run.trials >= 1, "run.trials", "must be >= 1");
  require(c.run.threads >= 1, "run.threads", "must be >= 1");
  require(c.output.format == "csv" || c.output.format == "report", "output.format",
          "expected csv|report");
  return c;
}

inline json config_to_json(const ExperimentConfig& c) {
  auto opt = [](const auto& o) -> json { return o ? json(*o) : json(nullptr); };
  json j;
  j["model"] = {{"vocab_size", c.model.vocab_size},
                {"context_order", c.model.context_order},
                {"flatness", c.model.flatness},
                {"seed", c.model.seed},
                {"max_length", c.model.max_length},
                {"uncond",
                 {{"kind", c.model.uncond_kind == UncondKind::Zero ? "zero" : "tabular"},
                  {"seed", c.model.effective_uncond_seed()}}}};
  j["sampling"] = {{"temperature", c.sampling.temperature},
                   {"top_k", opt(c.sampling.top_k)},
                   {"top_p", opt(c.sampling.top_p)},
                   {"cfg_scale", c.sampling.cfg_scale}};
  j["decode"] = {{"length", c.decode.length},
                 {"window", c.decode.window},
                 {"coupler", c.decode.coupler},
                 {"rejection", std::string(to_string(c.decode.rejection))}};
  j["run"] = {{"trials", c.run.trials}, {"seed", c.run.seed}, {"threads", c.run.threads}};
  j["output"] = {{"format", c.output.format}, {"path", c.output.path}, {"timing", c.output.timing}};
  if (c.sweep) j["sweep"] = {{"axis", c.sweep->axis}, {"values", c.sweep->values}};
  return j;
}

// Sets a dotted field path in a JSON tree. The value is parsed as JSON when
// possible (numbers, null, booleans, arrays) and kept as a string otherwise.
inline void apply_override(json& j, const std::string& path, const std::string& value) {
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError(path, "malformed field path");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[key] = parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

inline json load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "config file " + path + " is not valid JSON: " + e.what());
  }
}

// FNV-1a 64 over the canonical JSON of every field that can change results.
inline std::string fingerprint(const json& semantic) {
  const std::string canon = semantic.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

inline std::string fingerprint(const ExperimentConfig& c) {
  json j = config_to_json(c);
  j.erase("output");
  j["run"].erase("threads");
  j.erase("sweep");
  return fingerprint(j);
}

// Shortest round-trip decimal form; identical across runs.
inline std::string fmt_num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, end) : std::string("nan");
}

inline std::string fmt_num(std::uint64_t v) { return std::to_string(v); }

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string render_csv(const Table& t) {
  std::ostringstream os;
  for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << csv_escape(t.header[i]);
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_escape(row[i]);
    os << '\n';
  }
  return os.str();
}

// One `name=value` block per row, blocks separated by a blank line.
inline std::string render_report(const Table& t) {
  std::ostringstream os;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (r) os << '\n';
    for (std::size_t i = 0; i < t.header.size(); ++i)
      os << t.header[i] << '=' << (i < t.rows[r].size() ? t.rows[r][i] : "") << '\n';
  }
  return os.str();
}

inline std::string render(const Table& t, const std::string& format) {
  return format == "report" ? render_report(t) : render_csv(t);
}

inline void emit(const std::string& text, const std::string& path) {
  if (path == "-" || path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open output file " + path);
  out << text;
  if (!out) throw IoError("failed writing output file " + path);
}

inline Table reports_table(const std::vector<TestReport>& reports, std::uint64_t seed,
                           const std::string& fp) {
  Table t{{"name", "statistic", "value", "threshold", "pass", "samples", "notes", "seed",
           "fingerprint"},
          {}};
  for (const auto& r : reports)
    t.rows.push_back({r.name, r.statistic, fmt_num(r.value), fmt_num(r.threshold),
                      r.pass ? "true" : "false", fmt_num(r.samples), r.notes, fmt_num(seed), fp});
  return t;
}

inline const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols{
      "kind",      "fingerprint", "seed",     "trial",      "axis",
      "axis_value", "coupler",    "rejection", "window",    "cfg_scale",
      "flatness",  "vocab_size",  "length",   "trials",     "nfe_mean",
      "nfe_std",   "accepted_per_iter_mean",  "hamming_mean", "beta_mean",
      "wall_time_ms", "sequence"};
  return cols;
}

struct TrialOutcome {
  TokenSequence tokens;
  std::size_t nfe = 0;
  double accepted_per_iter = 0.0;
  std::optional<double> hamming;
  std::optional<double> beta;
};

struct Aggregate {
  double nfe_mean = 0.0;
  double nfe_std = 0.0;
  double accepted_per_iter_mean = 0.0;
  std::optional<double> hamming_mean;
  std::optional<double> beta_mean;
  double wall_time_ms = 0.0;
  std::size_t trials = 0;
};

inline std::vector<TrialOutcome> run_trials(const ExperimentConfig& cfg) {
  const TabularModel model(cfg.model);
  const DecoderConfig dc = cfg.decoder();
  const RandomSource master(cfg.run.seed);
  std::vector<TrialOutcome> out(cfg.run.trials);
  parallel_for(cfg.run.trials, cfg.run.threads, [&](std::size_t i) {
    DecodeResult r = run_decoder(model, dc, master.derive(i));
    out[i] = {std::move(r.tokens), r.stats.nfe, r.stats.mean_accepted_per_iteration(),
              r.stats.mean_hamming(), r.stats.mean_beta()};
  });
  return out;
}

inline Aggregate aggregate(const std::vector<TrialOutcome>& trials) {
  Aggregate a;
  a.trials = trials.size();
  const double n = static_cast<double>(trials.size());
  double hs = 0.0, bs = 0.0;
  std::size_t hk = 0, bk = 0;
  for (const auto& t : trials) {
    a.nfe_mean += static_cast<double>(t.nfe);
    a.accepted_per_iter_mean += t.accepted_per_iter;
    if (t.hamming) hs += *t.hamming, ++hk;
    if (t.beta) bs += *t.beta, ++bk;
  }
  a.nfe_mean /= n;
  a.accepted_per_iter_mean /= n;
  for (const auto& t : trials)
    a.nfe_std += (static_cast<double>(t.nfe) - a.nfe_mean) * (static_cast<double>(t.nfe) - a.nfe_mean);
  a.nfe_std = trials.size() > 1 ? std::sqrt(a.nfe_std / (n - 1.0)) : 0.0;
  if (hk) a.hamming_mean = hs / static_cast<double>(hk);
  if (bk) a.beta_mean = bs / static_cast<double>(bk);
  return a;
}

namespace detail {

inline std::string opt_num(const std::optional<double>& v) { return v ? fmt_num(*v) : ""; }

inline std::string join_tokens(const TokenSequence& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(s[i]);
  }
  return out;
}

inline std::vector<std::string> result_row(const ExperimentConfig& cfg, const std::string& kind,
                                           const std::string& trial, const std::string& axis,
                                           const std::string& axis_value, const Aggregate& a,
                                           const std::string& sequence) {
  return {kind,
          fingerprint(cfg),
          fmt_num(cfg.run.seed),
          trial,
          axis,
          axis_value,
          cfg.decode.coupler,
          cfg.is_vanilla() ? "" : std::string(to_string(cfg.decode.rejection)),
          fmt_num(static_cast<std::uint64_t>(cfg.decode.window)),
          fmt_num(cfg.sampling.cfg_scale),
          fmt_num(cfg.model.flatness),
          fmt_num(static_cast<std::uint64_t>(cfg.model.vocab_size)),
          fmt_num(static_cast<std::uint64_t>(cfg.decode.length)),
          fmt_num(static_cast<std::uint64_t>(a.trials)),
          fmt_num(a.nfe_mean),
          fmt_num(a.nfe_std),
          fmt_num(a.accepted_per_iter_mean),
          opt_num(a.hamming_mean),
          opt_num(a.beta_mean),
          cfg.output.timing ? fmt_num(a.wall_time_ms) : "",
          sequence};
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace detail

// One row per trial plus a final aggregate row.
inline Table cmd_generate(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto trials = run_trials(cfg);
  Aggregate agg = aggregate(trials);
  agg.wall_time_ms = detail::elapsed_ms(t0);

  Table t{result_columns(), {}};
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& tr = trials[i];
    Aggregate one;
    one.trials = 1;
    one.nfe_mean = static_cast<double>(tr.nfe);
    one.accepted_per_iter_mean = tr.accepted_per_iter;
    one.hamming_mean = tr.hamming;
    one.beta_mean = tr.beta;
    ExperimentConfig untimed = cfg;
    untimed.output.timing = false;  // only the aggregate is timed
    t.rows.push_back(detail::result_row(untimed, "trial", std::to_string(i), "", "", one,
                                        detail::join_tokens(tr.tokens)));
  }
  t.rows.push_back(detail::result_row(cfg, "aggregate", "", "", "", agg, ""));
  return t;
}

struct VerifyOutcome {
  std::vector<TestReport> reports;
  bool pass = false;
};

template <class Verifier = ModifiedRejection>
VerifyOutcome cmd_verify_lossless(const ExperimentConfig& cfg, const Verifier& verify = Verifier{}) {
  const TabularModel model(cfg.model);
  LosslessOptions opt;
  opt.length = cfg.decode.length;
  opt.window = cfg.decode.window;
  opt.trials = cfg.run.trials;
  opt.threads = cfg.run.threads;

  std::size_t count = 1;
  bool over = false;
  for (std::size_t i = 0; i < opt.length && !over; ++i) {
    if (count > opt.enumeration_budget / cfg.model.vocab_size) over = true;
    else count *= cfg.model.vocab_size;
  }
  if (over) {
    // Largest n that fits the budget at this vocab, and vice versa.
    std::size_t n_fit = 0;
    for (std::size_t c = 1; c <= opt.enumeration_budget / cfg.model.vocab_size; c *= cfg.model.vocab_size)
      ++n_fit;
    const auto v_fit = static_cast<std::size_t>(
        std::floor(std::pow(static_cast<double>(opt.enumeration_budget), 1.0 / static_cast<double>(opt.length))));
    throw ConfigError("decode.length",
                      "vocab_size^length exceeds the enumeration budget of " +
                          std::to_string(opt.enumeration_budget) + "; try length <= " +
                          std::to_string(n_fit) + " or vocab_size <= " + std::to_string(v_fit));
  }

  VerifyOutcome out;
  out.reports = lossless_suite(model, cfg.sampling, opt, RandomSource(cfg.run.seed), verify);
  out.pass = all_pass(out.reports);
  return out;
}

struct CouplingStatsOptions {
  std::size_t pairs = 50;
  std::size_t vocab = 8;
  double scale_min = 0.1;  // logit scale range; larger means lower entropy
  double scale_max = 5.0;
  std::size_t trials = 100'000;
  std::string pair_kind = "random";  // random | identical | uniform
  std::uint64_t seed = 0;
};

inline std::string fingerprint(const CouplingStatsOptions& o) {
  return fingerprint(json{{"pairs", o.pairs},
                          {"vocab", o.vocab},
                          {"scale_min", o.scale_min},
                          {"scale_max", o.scale_max},
                          {"trials", o.trials},
                          {"pair_kind", o.pair_kind},
                          {"seed", o.seed}});
}

inline CategoricalPair make_pair(const CouplingStatsOptions& o, RandomSource& rng) {
  if (o.pair_kind == "uniform") return {Categorical::uniform(o.vocab), Categorical::uniform(o.vocab)};
  CategoricalPair pq = random_pair(o.vocab, rng, o.scale_min, o.scale_max);
  if (o.pair_kind == "identical") return {pq.p, pq.p};
  return pq;
}

// Per-pair collision statistics, sorted by TV.
inline Table cmd_coupling_stats(const CouplingStatsOptions& o) {
  if (o.pairs < 1) throw ConfigError("pairs", "must be >= 1");
  if (o.vocab < 1) throw ConfigError("vocab", "must be >= 1");
  if (o.trials < 1) throw ConfigError("trials", "must be >= 1");
  if (!(o.scale_min > 0.0 && o.scale_max >= o.scale_min))
    throw ConfigError("entropy", "need 0 < scale_min <= scale_max");
  if (o.pair_kind != "random" && o.pair_kind != "identical" && o.pair_kind != "uniform")
    throw ConfigError("pair_kind", "expected random|identical|uniform");

  const RandomSource master(o.seed);
  std::vector<std::pair<std::size_t, CouplingEstimate>> est;
  for (std::size_t i = 0; i < o.pairs; ++i) {
    RandomSource gen = master.derive({0x9A1, i});
    const CategoricalPair pq = make_pair(o, gen);
    est.emplace_back(i, estimate_coupling(pq.p, pq.q, o.trials, master.derive({0x5A3, i})));
  }
  std::stable_sort(est.begin(), est.end(),
                   [](const auto& a, const auto& b) { return a.second.tv < b.second.tv; });

  const std::string fp = fingerprint(o);
  Table t{{"pair", "vocab", "tv", "renyi2_p", "renyi2_q", "independent_analytic",
           "independent_empirical", "maximal_cost", "maximal_empirical", "gumbel_empirical",
           "gumbel_lower_bound", "renyi_bound", "trials", "seed", "fingerprint"},
          {}};
  for (const auto& [i, e] : est)
    t.rows.push_back({std::to_string(i), std::to_string(o.vocab), fmt_num(e.tv), fmt_num(e.renyi2_p),
                      fmt_num(e.renyi2_q), fmt_num(e.independent_analytic),
                      fmt_num(e.independent_empirical), fmt_num(e.maximal_cost),
                      fmt_num(e.maximal_empirical), fmt_num(e.gumbel_empirical),
                      fmt_num(e.gumbel_lower_bound), fmt_num(e.renyi_bound), fmt_num(e.trials),
                      fmt_num(o.seed), fp});
  return t;
}

// Applies one sweep value to a copy of the base config.
inline ExperimentConfig with_axis_value(const ExperimentConfig& base, const std::string& axis,
                                        const json& value) {
  json j = config_to_json(base);
  j.erase("sweep");
  if (axis == "L" || axis == "window") j["decode"]["window"] = value;
  else if (axis == "cfg_scale") j["sampling"]["cfg_scale"] = value;
  else if (axis == "flatness") j["model"]["flatness"] = value;
  else if (axis == "coupler") j["decode"]["coupler"] = value;
  else throw ConfigError("sweep.axis", "expected L|cfg_scale|flatness|coupler");
  ExperimentConfig out = config_from_json(j);
  out.output = base.output;
  return out;
}

inline std::string axis_value_text(const json& v) {
  return v.is_string() ? v.get<std::string>() : (v.is_number() ? fmt_num(v.get<double>()) : v.dump());
}

// One aggregate row per axis value. Every point reuses the master seed, so
// trial k shares its random key across the sweep.
inline Table cmd_sweep(const ExperimentConfig& base, const std::string& axis,
                       const std::vector<json>& values) {
  if (values.empty()) throw ConfigError("sweep.values", "must be non-empty");
  Table t{result_columns(), {}};
  for (const json& v : values) {
    const ExperimentConfig cfg = with_axis_value(base, axis, v);
    const auto t0 = std::chrono::steady_clock::now();
    Aggregate agg = aggregate(run_trials(cfg));
    agg.wall_time_ms = detail::elapsed_ms(t0);
    t.rows.push_back(detail::result_row(cfg, "sweep", "", axis, axis_value_text(v), agg, ""));
  }
  return t;
}

}  // namespace sjd::harness
