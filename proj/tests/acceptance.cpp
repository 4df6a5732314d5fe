// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
//
//   acceptance [path/to/sjd]   (the CLI is needed for the determinism check)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "sjd/fault.hpp"
#include "sjd/harness.hpp"
#include "sjd/oracle.hpp"

namespace {

using namespace sjd;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

std::string failed_names(const std::vector<TestReport>& reports, std::size_t limit = 4) {
  std::string out;
  std::size_t k = 0;
  for (const auto& r : reports)
    if (!r.pass && k++ < limit) out += (out.empty() ? "" : "; ") + r.name + "=" + fmt(r.value);
  return out;
}

std::size_t count_failed(const std::vector<TestReport>& reports) {
  return static_cast<std::size_t>(
      std::count_if(reports.begin(), reports.end(), [](const TestReport& r) { return !r.pass; }));
}

// For |deviation| <= 3 sigma checks: worst z, plus the chance that a correct
// sampler shows at least one exceedance among this many pairs.
std::string exceedance_context(const std::vector<TestReport>& reports) {
  double worst = 0.0;
  for (const auto& r : reports)
    if (r.threshold > 0.0) worst = std::max(worst, 3.0 * r.value / r.threshold);
  const double per_pair = std::erfc(3.0 / std::sqrt(2.0));
  const double family = 1.0 - std::pow(1.0 - per_pair, static_cast<double>(reports.size()));
  return "worst |z|=" + fmt(worst, 3) + "; P(>=1 exceedance | correct, " +
         std::to_string(reports.size()) + " pairs)=" + fmt(family, 3);
}

TabularModel desk_model() {
  ModelSpec s;
  s.vocab_size = 4;
  s.context_order = 1;
  s.flatness = 2.0;
  s.seed = 1;
  return TabularModel(s);
}

// The flat toy model used by the speedup criteria.
TabularModel flat_model() {
  ModelSpec s;
  s.vocab_size = 16;
  s.context_order = 1;
  s.flatness = 4.0;
  s.seed = 7;
  return TabularModel(s);
}

constexpr std::size_t kFlatLength = 64;
const RandomSource kMaster(20240601);

LosslessOptions desk_lossless_options() {
  LosslessOptions opt;
  opt.length = 5;
  opt.window = 4;
  opt.trials = 200'000;
  opt.threads = default_threads();
  return opt;
}

Outcome lossless() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto reports = lossless_suite(desk_model(), {}, desk_lossless_options(), kMaster.derive(1));
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double worst_tv = 0.0, band = 0.0, min_p = 1.0;
  for (const auto& r : reports) {
    if (r.name == "calibration.vanilla_band") band = r.threshold;
    else if (r.statistic == "tv") worst_tv = std::max(worst_tv, r.value);
    else if (r.statistic == "chi2_p_value") min_p = std::min(min_p, r.value);
  }
  const bool fast = secs < 300.0;
  Outcome o{all_pass(reports) && fast,
            "7 decoders, max tv=" + fmt(worst_tv) + " band=" + fmt(band) +
                " min gof p=" + fmt(min_p) + " time=" + fmt(secs, 3) + "s"};
  if (!all_pass(reports)) o.detail += " failed: " + failed_names(reports);
  if (!fast) o.detail += " (over the 300 s budget)";
  return o;
}

const std::size_t kPairVocabs[] = {2, 8, 64};

Outcome acceptance_rate() {
  RandomSource gen = kMaster.derive(2);
  std::vector<TestReport> reports;
  for (std::size_t i = 0; i < 50; ++i) {
    const auto pq = random_pair(kPairVocabs[i % 3], gen);
    RandomSource rng = kMaster.derive({2, 1, i});
    reports.push_back(acceptance_rate_check(pq.p, pq.q, 100'000, rng));
  }
  return {all_pass(reports), "50 pairs, vocab {2,8,64}, m=1e5, " +
                                 std::to_string(count_failed(reports)) + " outside 3 sigma (" +
                                 exceedance_context(reports) + ")"};
}

Outcome maximal_cost() {
  RandomSource gen = kMaster.derive(3);
  double worst_diag = 0.0, worst_marg = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto pq = random_pair(1 + i % 6, gen);
    const auto f = mrs_joint_distribution(pq.p, pq.q);
    worst_diag = std::max(worst_diag, std::abs(f.diagonal_mass() - (1.0 - tv_distance(pq.p, pq.q))));
    const auto rows = f.row_sums(), cols = f.column_sums();
    for (std::size_t k = 0; k < pq.p.vocab_size(); ++k) {
      worst_marg = std::max(worst_marg, std::abs(rows[k] - pq.q.probs()[k]));
      worst_marg = std::max(worst_marg, std::abs(cols[k] - pq.p.probs()[k]));
    }
  }
  return {worst_diag <= 1e-12 && worst_marg <= 1e-12,
          "100 pairs, vocab<=6, max |diag-(1-tv)|=" + fmt(worst_diag) +
              " max marginal error=" + fmt(worst_marg)};
}

// Shared Monte Carlo estimates for the Gumbel and collision criteria.
std::vector<std::pair<std::size_t, CouplingEstimate>> coupling_estimates() {
  RandomSource gen = kMaster.derive(4);
  std::vector<std::pair<std::size_t, CouplingEstimate>> out;
  for (std::size_t i = 0; i < 50; ++i) {
    const std::size_t v = kPairVocabs[i % 3];
    const auto pq = random_pair(v, gen);
    out.emplace_back(v, estimate_coupling(pq.p, pq.q, 100'000, kMaster.derive({4, 1, i})));
  }
  return out;
}

Outcome gumbel_bounds(const std::vector<std::pair<std::size_t, CouplingEstimate>>& est) {
  std::vector<TestReport> reports;
  std::size_t binary = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    for (auto& r : coupling_bound_reports(est[i].second, est[i].first, "pair" + std::to_string(i)))
      if (r.name.find("gumbel") != std::string::npos) reports.push_back(r);
    if (est[i].first == 2) ++binary;
  }
  return {all_pass(reports), std::to_string(est.size()) + " pairs (" + std::to_string(binary) +
                                 " binary), m=1e5, " + std::to_string(count_failed(reports)) +
                                 " bound violations" +
                                 (all_pass(reports) ? "" : ": " + failed_names(reports))};
}

Outcome collision_formula(const std::vector<std::pair<std::size_t, CouplingEstimate>>& est) {
  RandomSource gen = kMaster.derive(5);
  double worst_excess = -1.0;
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto pq = random_pair(2 + i % 63, gen, 0.05, 8.0);
    const double bound =
        std::exp(-0.5 * (renyi2_entropy(pq.p) + renyi2_entropy(pq.q)));
    worst_excess = std::max(worst_excess, independent_collision(pq.p, pq.q) - bound);
  }
  double worst_eq = 0.0;
  for (std::size_t v = 1; v <= 64; ++v) {
    const auto u = Categorical::uniform(v);
    const double bound = std::exp(-0.5 * (renyi2_entropy(u) + renyi2_entropy(u)));
    worst_eq = std::max(worst_eq, std::abs(independent_collision(u, u) - bound));
  }
  std::vector<TestReport> empirical;
  for (std::size_t i = 0; i < est.size(); ++i)
    for (auto& r : coupling_bound_reports(est[i].second, est[i].first, "pair" + std::to_string(i)))
      if (r.name.ends_with(".independent")) empirical.push_back(r);
  const bool ok = worst_excess <= 1e-12 && worst_eq <= 1e-12 && all_pass(empirical);
  return {ok, "1000 pairs max(sum pq - bound)=" + fmt(worst_excess) +
                  ", uniform equality error=" + fmt(worst_eq) + ", empirical " +
                  std::to_string(count_failed(empirical)) + "/50 outside 3 sigma (" +
                  exceedance_context(empirical) + ")"};
}

struct PairedRuns {
  std::vector<double> nfe;
  std::vector<DecodeStats> stats;
};

// Run i of every configuration uses the same key, kMaster.derive({6, i}).
PairedRuns paired_runs(const TabularModel& model, CouplerKind c, std::size_t window,
                       std::size_t runs) {
  PairedRuns out;
  out.nfe.resize(runs);
  out.stats.resize(runs);
  const SjdOptions opt{kFlatLength, window, c, RejectionMode::FinalizeResidual};
  parallel_for(runs, default_threads(), [&](std::size_t i) {
    auto r = decode_sjd(model, {}, opt, kMaster.derive({6, i}));
    out.nfe[i] = static_cast<double>(r.stats.nfe);
    out.stats[i] = std::move(r.stats);
  });
  return out;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Standard error of the mean paired difference a - b.
double paired_se(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m += a[i] - b[i];
  m /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - m) * (a[i] - b[i] - m);
  return std::sqrt(ss / (n - 1.0) / n);
}

Outcome nfe_ordering(const TabularModel& model) {
  const auto mc = paired_runs(model, CouplerKind::MaximalCoupling, 16, 200);
  const auto gs = paired_runs(model, CouplerKind::GumbelSharing, 16, 200);
  const auto ind = paired_runs(model, CouplerKind::Independent, 16, 200);
  const double m_mc = mean(mc.nfe), m_gs = mean(gs.nfe), m_ind = mean(ind.nfe);
  const auto t = paired_t_test(ind.nfe, mc.nfe);
  const bool ok = m_mc < m_gs && m_gs < m_ind && m_ind < static_cast<double>(kFlatLength) &&
                  t.p_one_sided < 0.01;
  return {ok, "n=64 L=16 200 paired runs: maximal=" + fmt(m_mc) + " gumbel=" + fmt(m_gs) +
                  " independent=" + fmt(m_ind) + ", paired p(ind>max)=" + fmt(t.p_one_sided, 3)};
}

Outcome window_scaling(const TabularModel& model) {
  const std::size_t windows[] = {4, 8, 16, 32};
  std::vector<std::vector<double>> mc, ind;
  for (std::size_t L : windows) {
    mc.push_back(paired_runs(model, CouplerKind::MaximalCoupling, L, 200).nfe);
    ind.push_back(paired_runs(model, CouplerKind::Independent, L, 200).nfe);
  }
  bool monotone = true;
  std::string mc_txt = "maximal", ind_txt = "independent";
  for (std::size_t k = 0; k < 4; ++k) {
    mc_txt += " " + fmt(mean(mc[k]));
    ind_txt += " " + fmt(mean(ind[k]));
    if (k > 0 && mean(mc[k]) - mean(mc[k - 1]) > 3.0 * paired_se(mc[k], mc[k - 1]))
      monotone = false;
  }
  // Doubling the window from 16 to 32 buys independent drafting less than it
  // buys maximal coupling.
  const double gain_mc = mean(mc[2]) - mean(mc[3]);
  const double gain_ind = mean(ind[2]) - mean(ind[3]);
  const bool plateau = gain_ind < gain_mc;
  const bool final_gap = mean(mc[3]) < mean(ind[3]);
  return {monotone && plateau && final_gap,
          "L=4,8,16,32 nfe: " + mc_txt + "; " + ind_txt + "; gain 16->32 maximal=" +
              fmt(gain_mc) + " independent=" + fmt(gain_ind) +
              (monotone ? "" : " (maximal increases beyond paired noise)")};
}

Outcome hamming_correlation(const TabularModel& model) {
  const auto r = hamming_nfe_correlation(
      model, {}, {kFlatLength, 8, CouplerKind::Independent, RejectionMode::FinalizeResidual}, 300,
      kMaster.derive(8), default_threads());
  return {r.pass, "independent, L=8, 300 runs: pearson r=" + fmt(r.value) + " (> " +
                      fmt(kHammingNfeMinR) + ")" + (r.notes.empty() ? "" : " " + r.notes)};
}

// Pooled within-position variance of beta across iterations, and mean beta.
std::pair<double, double> beta_summary(const std::vector<DecodeStats>& runs) {
  double ss = 0.0, sum = 0.0;
  std::size_t dof = 0, count = 0;
  for (const auto& s : runs) {
    const auto [run_ss, run_dof] = s.beta_within_position_ss();
    ss += run_ss;
    dof += run_dof;
    for (const auto& traj : s.beta_trajectories)
      for (double b : traj) {
        sum += b;
        ++count;
      }
  }
  return {dof ? ss / static_cast<double>(dof) : 0.0, count ? sum / static_cast<double>(count) : 0.0};
}

Outcome beta_stabilization(const TabularModel& model) {
  const auto mc = paired_runs(model, CouplerKind::MaximalCoupling, 16, 100);
  const auto ind = paired_runs(model, CouplerKind::Independent, 16, 100);
  const auto [var_mc, mean_mc] = beta_summary(mc.stats);
  const auto [var_ind, mean_ind] = beta_summary(ind.stats);
  const bool var_ok = var_mc < var_ind;
  const bool mean_ok = mean_mc >= mean_ind;
  return {var_ok && mean_ok, "100 paired runs: pooled var maximal=" + fmt(var_mc) +
                                 " independent=" + fmt(var_ind) + (var_ok ? "" : " (NOT lower)") +
                                 "; mean beta maximal=" + fmt(mean_mc) + " independent=" +
                                 fmt(mean_ind) + (mean_ok ? "" : " (NOT higher)")};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const std::string& cli) {
  namespace fs = std::filesystem;
  if (cli.empty() || !fs::exists(cli)) return {false, "CLI binary not given or missing: '" + cli + "'"};
  const fs::path dir = fs::temp_directory_path() / ("sjd_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"generate", "generate --model.vocab_size 16 --model.flatness 4 --decode.length 32 "
                   "--decode.window 8 --decode.coupler gumbel --run.trials 25 --seed 11"},
      {"sweep", "sweep --model.vocab_size 16 --model.flatness 4 --decode.length 32 "
                "--run.trials 20 --axis L --values 1,4,16 --seed 12"},
      {"coupling", "coupling-stats --pairs 8 --vocab 8 --trials 5000 --seed 13"},
      {"verify", "verify-lossless --model.vocab_size 2 --decode.length 4 --decode.window 3 "
                 "--run.trials 3000 --seed 14 --format csv"},
  };
  std::size_t identical = 0;
  std::string bad;
  for (const auto& [name, args] : commands) {
    std::string outs[2];
    for (int rep = 0; rep < 2; ++rep) {
      // The second repetition changes the thread count, which must not matter.
      const fs::path file = dir / (name + std::to_string(rep) + ".out");
      const std::string threads =
          name == "coupling" ? "" : (rep ? " --threads 3" : " --threads 1");
      const std::string cmd =
          "\"" + cli + "\" " + args + threads + " --out \"" + file.string() + "\" > /dev/null 2>&1";
      const int rc = std::system(cmd.c_str());
      if (rc == -1 || WEXITSTATUS(rc) > 1) bad += name + ": exit " + std::to_string(WEXITSTATUS(rc)) + " ";
      outs[rep] = slurp(file);
    }
    if (!outs[0].empty() && outs[0] == outs[1]) ++identical;
    else bad += name + ": outputs differ ";
  }
  fs::remove_all(dir);
  return {identical == commands.size(),
          std::to_string(identical) + "/" + std::to_string(commands.size()) +
              " commands byte-identical on repeat" + (bad.empty() ? "" : " — " + bad)};
}

Outcome mutation_detection() {
  const auto reports = lossless_suite(desk_model(), {}, desk_lossless_options(), kMaster.derive(1),
                                      fault::SkipResidual{});
  const std::size_t failed = count_failed(reports);
  return {failed > 0, "skip-residual fault: " + std::to_string(failed) + "/" +
                          std::to_string(reports.size()) + " lossless checks fail (" +
                          failed_names(reports, 2) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const TabularModel flat = flat_model();
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
  std::vector<std::pair<std::size_t, CouplingEstimate>> est;
  criteria.emplace_back("C1  losslessness", [] { return lossless(); });
  criteria.emplace_back("C2  acceptance rate = 1 - TV", [] { return acceptance_rate(); });
  criteria.emplace_back("C3  maximal coupling cost", [] { return maximal_cost(); });
  criteria.emplace_back("C4  Gumbel collision bounds", [&] {
    est = coupling_estimates();
    return gumbel_bounds(est);
  });
  criteria.emplace_back("C5  collision formula and Renyi bound", [&] { return collision_formula(est); });
  criteria.emplace_back("C6  NFE ordering", [&] { return nfe_ordering(flat); });
  criteria.emplace_back("C7  window-size behavior", [&] { return window_scaling(flat); });
  criteria.emplace_back("C8  Hamming-NFE correlation", [&] { return hamming_correlation(flat); });
  criteria.emplace_back("C9  beta stabilization", [&] { return beta_stabilization(flat); });
  criteria.emplace_back("C10 determinism", [&] { return determinism(cli); });
  criteria.emplace_back("C11 mutation detection", [] { return mutation_detection(); });

  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  " << o.detail << std::endl;
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed")
            << std::endl;
  return failures ? 1 : 0;
}
