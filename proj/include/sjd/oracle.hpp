#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "sjd/couplers.hpp"
#include "sjd/decoder.hpp"
#include "sjd/model.hpp"
#include "sjd/parallel.hpp"
#include "sjd/prob.hpp"
#include "sjd/random.hpp"

namespace sjd {

struct EmpiricalLaw {
  std::map<TokenSequence, std::uint64_t> counts;
  std::uint64_t total = 0;

  void add(const TokenSequence& s, std::uint64_t k = 1) {
    counts[s] += k;
    total += k;
  }

  void merge(const EmpiricalLaw& other) {
    for (const auto& [s, k] : other.counts) add(s, k);
  }

  double frequency(const TokenSequence& s) const {
    auto it = counts.find(s);
    return it == counts.end() || total == 0
               ? 0.0
               : static_cast<double>(it->second) / static_cast<double>(total);
  }
};

struct TestReport {
  std::string name;
  std::string statistic;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::uint64_t samples = 0;
  std::string notes;
};

inline bool all_pass(const std::vector<TestReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const TestReport& r) { return r.pass; });
}

// Either plain autoregressive sampling or Jacobi decoding with a coupler.
struct DecoderConfig {
  bool vanilla = false;
  SamplingConfig sampling;
  SjdOptions sjd;

  std::string label() const {
    if (vanilla) return "vanilla";
    return std::string(to_string(sjd.coupler)) + "/" + std::string(to_string(sjd.rejection));
  }
};

template <ArModel M, class Verifier = ModifiedRejection>
DecodeResult run_decoder(const M& model, const DecoderConfig& cfg, const RandomSource& rng,
                         const Verifier& verify = Verifier{}) {
  if (cfg.vanilla) return decode_vanilla(model, cfg.sampling, cfg.sjd.length, rng);
  return decode_sjd(model, cfg.sampling, cfg.sjd, rng, verify);
}

// Trial i always runs on rng.derive(i), independent of the thread count.
template <ArModel M, class Verifier = ModifiedRejection>
EmpiricalLaw collect(const M& model, const DecoderConfig& cfg, std::size_t runs,
                     const RandomSource& rng, std::size_t threads = 1,
                     const Verifier& verify = Verifier{}) {
  if (runs < 1) throw PreconditionError("collect: runs must be >= 1");
  std::vector<TokenSequence> out(runs);
  parallel_for(runs, threads, [&](std::size_t i) {
    out[i] = run_decoder(model, cfg, rng.derive(i), verify).tokens;
  });
  EmpiricalLaw law;
  for (const auto& s : out) law.add(s);
  return law;
}

inline double tv_to_exact(const EmpiricalLaw& emp, const SequenceLaw& exact) {
  double acc = 0.0;
  for (const auto& [s, p] : exact) acc += std::abs(emp.frequency(s) - p);
  for (const auto& [s, k] : emp.counts)
    if (!exact.contains(s)) acc += emp.frequency(s);
  return 0.5 * acc;
}

inline constexpr double kGofAlpha = 1e-3;

// Pearson chi-square against the exact law. Cells whose expected count is
// below 5 are pooled into one tail cell (grown from the smallest kept cells
// until it reaches 5 as well).
inline TestReport gof_test(const EmpiricalLaw& emp, const SequenceLaw& exact,
                           double alpha = kGofAlpha) {
  TestReport r;
  r.name = "gof";
  r.statistic = "chi2_p_value";
  r.threshold = alpha;
  r.samples = emp.total;
  if (emp.total == 0) {
    r.notes = "empty sample";
    return r;
  }

  for (const auto& [s, k] : emp.counts) {
    if (!exact.contains(s)) {
      r.value = 0.0;
      r.pass = false;
      r.notes = "observed a sequence with zero exact probability";
      return r;
    }
  }

  const double m = static_cast<double>(emp.total);
  struct Cell {
    double expected;
    double observed;
  };
  std::vector<Cell> cells;
  cells.reserve(exact.size());
  for (const auto& [s, p] : exact) {
    auto it = emp.counts.find(s);
    cells.push_back({p * m, it == emp.counts.end() ? 0.0 : static_cast<double>(it->second)});
  }
  std::sort(cells.begin(), cells.end(),
            [](const Cell& a, const Cell& b) { return a.expected < b.expected; });

  Cell tail{0.0, 0.0};
  std::size_t first_kept = 0;
  while (first_kept < cells.size() && cells[first_kept].expected < 5.0) {
    tail.expected += cells[first_kept].expected;
    tail.observed += cells[first_kept].observed;
    ++first_kept;
  }
  while (tail.expected > 0.0 && tail.expected < 5.0 && first_kept < cells.size()) {
    tail.expected += cells[first_kept].expected;
    tail.observed += cells[first_kept].observed;
    ++first_kept;
  }

  std::vector<Cell> pooled(cells.begin() + static_cast<std::ptrdiff_t>(first_kept), cells.end());
  if (tail.expected > 0.0) pooled.push_back(tail);

  if (pooled.size() <= 1) {
    r.value = 1.0;
    r.pass = true;
    r.notes = "single cell; chi-square is degenerate";
    return r;
  }

  double chi2 = 0.0;
  for (const Cell& c : pooled) chi2 += (c.observed - c.expected) * (c.observed - c.expected) / c.expected;
  const auto dof = static_cast<double>(pooled.size() - 1);
  const boost::math::chi_squared dist(dof);
  r.value = boost::math::cdf(boost::math::complement(dist, chi2));
  r.pass = r.value > alpha;
  std::ostringstream os;
  os << "chi2=" << chi2 << " dof=" << pooled.size() - 1 << " pooled_cells=" << first_kept;
  r.notes = os.str();
  return r;
}

// Empirical mrs acceptance with x ~ q against 1 - TV(p, q), at 3 sigma.
inline TestReport acceptance_rate_check(const Categorical& p, const Categorical& q,
                                        std::size_t trials, RandomSource& rng) {
  if (trials < 1000) throw PreconditionError("acceptance_rate_check: need at least 1000 trials");
  std::uint64_t accepted = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    const Token x = sample_independent(q, rng);
    if (mrs(p, q, x, rng).accepted) ++accepted;
  }
  const double m = static_cast<double>(trials);
  const double beta = 1.0 - tv_distance(p, q);
  const double rate = static_cast<double>(accepted) / m;
  TestReport r;
  r.name = "acceptance_rate";
  r.statistic = "abs(rate - (1 - tv))";
  r.value = std::abs(rate - beta);
  r.threshold = 3.0 * std::sqrt(beta * (1.0 - beta) / m);
  r.pass = r.value <= r.threshold;
  r.samples = trials;
  std::ostringstream os;
  os << "rate=" << rate << " expected=" << beta;
  r.notes = os.str();
  return r;
}

struct CategoricalPair {
  Categorical p;
  Categorical q;
};

// Random pair with logit scale log-uniform in [scale_lo, scale_hi] and q's
// logits a perturbation of p's, so TV spans (0, 1) across draws.
inline CategoricalPair random_pair(std::size_t vocab, RandomSource& rng, double scale_lo = 0.1,
                                   double scale_hi = 5.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale =
      std::exp(std::log(scale_lo) + rng.uniform01() * (std::log(scale_hi) - std::log(scale_lo)));
  const double spread = 2.0 * rng.uniform01();
  std::vector<double> a(vocab), b(vocab);
  for (std::size_t i = 0; i < vocab; ++i) {
    a[i] = scale * normal(rng.engine());
    b[i] = a[i] + scale * spread * normal(rng.engine());
  }
  return {softmax(a), softmax(b)};
}

struct CouplingEstimate {
  double tv = 0.0;
  double renyi2_p = 0.0;
  double renyi2_q = 0.0;
  double independent_analytic = 0.0;
  double independent_empirical = 0.0;
  double maximal_cost = 0.0;
  double maximal_empirical = 0.0;
  double gumbel_empirical = 0.0;
  double gumbel_lower_bound = 0.0;
  double renyi_bound = 0.0;
  std::uint64_t trials = 0;
};

// Monte Carlo collision rates of the three couplings for one pair. Each
// coupling draws from its own substream of rng.
inline CouplingEstimate estimate_coupling(const Categorical& p, const Categorical& q,
                                          std::size_t trials, const RandomSource& rng) {
  CouplingEstimate e;
  e.tv = tv_distance(p, q);
  e.renyi2_p = renyi2_entropy(p);
  e.renyi2_q = renyi2_entropy(q);
  e.independent_analytic = independent_collision(p, q);
  e.maximal_cost = maximal_coupling_cost(p, q);
  e.gumbel_lower_bound = (1.0 - e.tv) / (1.0 + e.tv);
  e.renyi_bound = std::exp(-0.5 * (e.renyi2_p + e.renyi2_q));
  e.trials = trials;

  RandomSource ind_a = rng.derive({1, 0});
  RandomSource ind_b = rng.derive({1, 1});
  RandomSource mc = rng.derive(2);
  RandomSource gs = rng.derive(3);
  std::uint64_t ind_hits = 0, mc_hits = 0, gs_hits = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    if (sample_independent(p, ind_a) == sample_independent(q, ind_b)) ++ind_hits;
    const Token x = sample_independent(q, mc);
    if (mrs(p, q, x, mc).token == x) ++mc_hits;
    const GumbelVector g = sample_gumbel_noise(p.vocab_size(), gs);
    const auto [a, b] = gs_couple(p, q, g);
    if (a == b) ++gs_hits;
  }
  const double m = static_cast<double>(trials);
  e.independent_empirical = static_cast<double>(ind_hits) / m;
  e.maximal_empirical = static_cast<double>(mc_hits) / m;
  e.gumbel_empirical = static_cast<double>(gs_hits) / m;
  return e;
}

namespace detail {

inline double binomial_sigma(double rate, double ref, double m) {
  return std::sqrt(std::max(rate * (1.0 - rate), ref * (1.0 - ref)) / m);
}

}  // namespace detail

// Bound checks for one estimated pair: Gumbel collision between
// (1-TV)/(1+TV) and 1-TV, independent collision equal to sum p*q, and
// sum p*q under the Renyi-2 bound. Binary pairs also pin Gumbel to 1-TV.
inline std::vector<TestReport> coupling_bound_reports(const CouplingEstimate& e,
                                                      std::size_t vocab,
                                                      const std::string& prefix) {
  const double m = static_cast<double>(e.trials);
  std::vector<TestReport> out;
  auto add = [&](std::string name, std::string stat, double value, double threshold, bool pass) {
    out.push_back({prefix + "." + std::move(name), std::move(stat), value, threshold, pass,
                   e.trials, "tv=" + std::to_string(e.tv)});
  };

  const double s_lo = detail::binomial_sigma(e.gumbel_empirical, e.gumbel_lower_bound, m);
  const double lo = e.gumbel_lower_bound - 3.0 * s_lo;
  add("gumbel_lower", "gumbel_collision >= (1-tv)/(1+tv) - 3sigma", e.gumbel_empirical, lo,
      e.gumbel_empirical >= lo);

  const double s_hi = detail::binomial_sigma(e.gumbel_empirical, e.maximal_cost, m);
  const double hi = e.maximal_cost + 3.0 * s_hi;
  add("gumbel_upper", "gumbel_collision <= 1-tv + 3sigma", e.gumbel_empirical, hi,
      e.gumbel_empirical <= hi);

  const double s_ind = std::sqrt(e.independent_analytic * (1.0 - e.independent_analytic) / m);
  add("independent", "abs(empirical - sum p*q)",
      std::abs(e.independent_empirical - e.independent_analytic), 3.0 * s_ind,
      std::abs(e.independent_empirical - e.independent_analytic) <= 3.0 * s_ind);

  add("renyi_bound", "sum p*q <= exp(-(H2(p)+H2(q))/2)", e.independent_analytic,
      e.renyi_bound + 1e-12, e.independent_analytic <= e.renyi_bound + 1e-12);

  if (vocab == 2) {
    const double s_b = std::sqrt(e.maximal_cost * (1.0 - e.maximal_cost) / m);
    add("gumbel_binary", "abs(gumbel_collision - (1-tv))",
        std::abs(e.gumbel_empirical - e.maximal_cost), 3.0 * s_b,
        std::abs(e.gumbel_empirical - e.maximal_cost) <= 3.0 * s_b);
  }
  return out;
}

template <class PairGenerator>
std::vector<TestReport> coupling_bound_sweep(std::size_t pairs, PairGenerator&& next_pair,
                                             std::size_t trials, const RandomSource& rng) {
  std::vector<TestReport> out;
  for (std::size_t i = 0; i < pairs; ++i) {
    const CategoricalPair pq = next_pair(i);
    const CouplingEstimate e = estimate_coupling(pq.p, pq.q, trials, rng.derive(i));
    auto reps = coupling_bound_reports(e, pq.p.vocab_size(), "pair" + std::to_string(i));
    out.insert(out.end(), reps.begin(), reps.end());
  }
  return out;
}

inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

struct PairedTest {
  double mean_diff = 0.0;
  double t = 0.0;
  double p_one_sided = 1.0;  // H1: mean difference > 0
};

// One-sided paired t-test on diffs[i] = a[i] - b[i].
inline PairedTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw PreconditionError("paired_t_test: need two equal-length samples of size >= 2");
  const double n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  PairedTest out;
  out.mean_diff = mean;
  const double se = std::sqrt(ss / (n - 1.0) / n);
  if (se == 0.0) {
    out.t = mean > 0 ? std::numeric_limits<double>::infinity()
                     : (mean < 0 ? -std::numeric_limits<double>::infinity() : 0.0);
    out.p_one_sided = mean > 0 ? 0.0 : 1.0;
    return out;
  }
  out.t = mean / se;
  const boost::math::students_t dist(n - 1.0);
  out.p_one_sided = boost::math::cdf(boost::math::complement(dist, out.t));
  return out;
}

inline constexpr double kHammingNfeMinR = 0.3;

// Pearson r between per-run mean window Hamming distance and per-run NFE.
template <ArModel M>
TestReport hamming_nfe_correlation(const M& model, const SamplingConfig& sampling,
                                   const SjdOptions& opt, std::size_t runs,
                                   const RandomSource& rng, std::size_t threads = 1) {
  if (runs < 100) throw PreconditionError("hamming_nfe_correlation: need at least 100 runs");
  std::vector<double> hamming(runs), nfe(runs);
  parallel_for(runs, threads, [&](std::size_t i) {
    const DecodeResult r = decode_sjd(model, sampling, opt, rng.derive(i));
    hamming[i] = r.stats.mean_hamming().value_or(0.0);
    nfe[i] = static_cast<double>(r.stats.nfe);
  });
  TestReport rep;
  rep.name = "hamming_nfe_correlation";
  rep.statistic = "pearson_r";
  rep.threshold = kHammingNfeMinR;
  rep.samples = runs;
  const auto r = pearson(hamming, nfe);
  if (!r) {
    rep.pass = true;
    rep.notes = "skipped: zero variance in hamming or nfe";
    return rep;
  }
  rep.value = *r;
  rep.pass = *r > kHammingNfeMinR;
  rep.notes = "coupler=" + std::string(to_string(opt.coupler));
  return rep;
}

struct LosslessOptions {
  std::size_t length = 5;
  std::size_t window = 4;
  std::size_t trials = 200'000;
  std::size_t calibration_replicates = 5;
  double band_margin = 0.2;
  double gof_alpha = kGofAlpha;
  std::size_t threads = 1;
  std::size_t enumeration_budget = kDefaultEnumerationBudget;
};

inline std::vector<DecoderConfig> lossless_decoders(const SamplingConfig& sampling,
                                                    std::size_t length, std::size_t window) {
  std::vector<DecoderConfig> out;
  out.push_back({true, sampling, {length, window, CouplerKind::Independent, {}}});
  for (auto mode : {RejectionMode::FinalizeResidual, RejectionMode::RedraftPosition})
    for (auto c : {CouplerKind::Independent, CouplerKind::MaximalCoupling, CouplerKind::GumbelSharing})
      out.push_back({false, sampling, {length, window, c, mode}});
  return out;
}

// Losslessness verdict for vanilla plus every coupler under both rejection
// conventions. The TV band is the largest TV of `calibration_replicates`
// vanilla collections at the same trial count, widened by band_margin. Each
// decoder must stay inside the band and pass the chi-square test.
template <ArModel M, class Verifier = ModifiedRejection>
std::vector<TestReport> lossless_suite(const M& model, const SamplingConfig& sampling,
                                       const LosslessOptions& opt, const RandomSource& rng,
                                       const Verifier& verify = Verifier{}) {
  const SequenceLaw exact =
      enumerate_sequence_distribution(model, sampling, opt.length, opt.enumeration_budget);

  std::vector<TestReport> out;
  const DecoderConfig vanilla{true, sampling, {opt.length, opt.window, {}, {}}};
  double band = 0.0;
  const std::size_t replicates = std::max<std::size_t>(1, opt.calibration_replicates);
  for (std::size_t r = 0; r < replicates; ++r) {
    const EmpiricalLaw law = collect(model, vanilla, opt.trials, rng.derive({0xCA11, r}), opt.threads);
    band = std::max(band, tv_to_exact(law, exact));
  }
  const double tv_threshold = band * (1.0 + opt.band_margin);
  {
    std::ostringstream os;
    os << "vanilla replicates=" << replicates << " margin=" << opt.band_margin;
    out.push_back({"calibration.vanilla_band", "max_vanilla_tv", band, tv_threshold, true,
                   opt.trials, os.str()});
  }

  const auto decoders = lossless_decoders(sampling, opt.length, opt.window);
  for (std::size_t d = 0; d < decoders.size(); ++d) {
    const DecoderConfig& cfg = decoders[d];
    const EmpiricalLaw law = collect(model, cfg, opt.trials, rng.derive({0xDEC0, d}), opt.threads,
                                     verify);
    const double tv = tv_to_exact(law, exact);
    out.push_back({cfg.label() + ".tv_to_exact", "tv", tv, tv_threshold, tv <= tv_threshold,
                   law.total, "exact_cells=" + std::to_string(exact.size())});
    TestReport g = gof_test(law, exact, opt.gof_alpha);
    g.name = cfg.label() + ".gof";
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace sjd
