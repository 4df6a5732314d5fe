#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "sjd/fault.hpp"
#include "sjd/oracle.hpp"

namespace sjd {
namespace {

TabularModel make_model(std::size_t vocab, std::size_t order, double flatness,
                        std::uint64_t seed = 1) {
  ModelSpec s;
  s.vocab_size = vocab;
  s.context_order = order;
  s.flatness = flatness;
  s.seed = seed;
  return TabularModel(s);
}

// m i.i.d. draws from a finite law.
EmpiricalLaw sample_law(const SequenceLaw& law, std::size_t m, RandomSource& rng) {
  std::vector<TokenSequence> seqs;
  std::vector<double> w;
  for (const auto& [s, p] : law) {
    seqs.push_back(s);
    w.push_back(p);
  }
  const auto cat = Categorical::from_weights(w);
  EmpiricalLaw emp;
  for (std::size_t i = 0; i < m; ++i)
    emp.add(seqs[static_cast<std::size_t>(sample_independent(cat, rng))]);
  return emp;
}

TEST(EmpiricalLaw, AddMergeFrequency) {
  EmpiricalLaw a, b;
  a.add({0, 1});
  a.add({0, 1});
  b.add({1, 1}, 2);
  a.merge(b);
  EXPECT_EQ(a.total, 4u);
  EXPECT_DOUBLE_EQ(a.frequency({0, 1}), 0.5);
  EXPECT_DOUBLE_EQ(a.frequency({2, 2}), 0.0);
}

TEST(Collect, DeterministicAcrossThreadCounts) {
  const auto m = make_model(4, 1, 1.0);
  const DecoderConfig cfg{false, {}, {5, 3, CouplerKind::GumbelSharing, {}}};
  const auto a = collect(m, cfg, 500, RandomSource(3), 1);
  const auto b = collect(m, cfg, 500, RandomSource(3), 4);
  EXPECT_EQ(a.counts, b.counts);
}

TEST(Collect, GreedyGivesSingleSequence) {
  const auto m = make_model(4, 1, 1.0);
  SamplingConfig greedy;
  greedy.top_k = 1;
  for (bool vanilla : {true, false}) {
    const DecoderConfig cfg{vanilla, greedy, {6, 3, CouplerKind::MaximalCoupling, {}}};
    EXPECT_EQ(collect(m, cfg, 200, RandomSource(1)).counts.size(), 1u);
  }
}

TEST(TvToExact, ZeroForExactCountsAndOneForDisjoint) {
  const SequenceLaw exact{{{0}, 0.25}, {{1}, 0.75}};
  EmpiricalLaw emp;
  emp.add({0}, 1);
  emp.add({1}, 3);
  EXPECT_DOUBLE_EQ(tv_to_exact(emp, exact), 0.0);
  EmpiricalLaw other;
  other.add({2}, 5);
  EXPECT_DOUBLE_EQ(tv_to_exact(other, exact), 1.0);
}

TEST(GofTest, ZeroProbabilityObservationFails) {
  const SequenceLaw exact{{{0}, 0.5}, {{1}, 0.5}};
  EmpiricalLaw emp;
  emp.add({0}, 500);
  emp.add({1}, 499);
  emp.add({2}, 1);
  EXPECT_FALSE(gof_test(emp, exact).pass);
}

TEST(GofTest, FalseRejectionRateIsCalibrated) {
  const auto m = make_model(3, 1, 1.0, 4);
  const auto exact = enumerate_sequence_distribution(m, {}, 3);
  RandomSource rng(40);
  int failures = 0;
  const int resamples = 1000;
  for (int i = 0; i < resamples; ++i)
    if (!gof_test(sample_law(exact, 2000, rng), exact).pass) ++failures;
  EXPECT_LE(failures / double(resamples), 0.005);
}

TEST(GofTest, DetectsSmallMassShift) {
  const auto m = make_model(4, 1, 2.0, 1);
  const auto exact = enumerate_sequence_distribution(m, {}, 5);
  // Move 5% of the mass onto the least likely sequence.
  SequenceLaw shifted = exact;
  auto lo = shifted.begin();
  for (auto it = shifted.begin(); it != shifted.end(); ++it)
    if (it->second < lo->second) lo = it;
  for (auto& [s, p] : shifted) p *= 0.95;
  lo->second += 0.05;
  RandomSource rng(41);
  const auto emp = sample_law(shifted, 200'000, rng);
  EXPECT_FALSE(gof_test(emp, exact).pass);
  const auto honest = sample_law(exact, 200'000, rng);
  EXPECT_TRUE(gof_test(honest, exact).pass);
}

TEST(AcceptanceRateCheck, MatchesOneMinusTv) {
  RandomSource rng(42);
  EXPECT_TRUE(acceptance_rate_check(Categorical({0.6, 0.4}), Categorical({0.4, 0.6}), 100'000, rng).pass);
  EXPECT_TRUE(acceptance_rate_check(Categorical({0.2, 0.8}), Categorical({0.2, 0.8}), 10'000, rng).pass);
  EXPECT_THROW(acceptance_rate_check(Categorical({0.5, 0.5}), Categorical({0.5, 0.5}), 10, rng),
               PreconditionError);
}

TEST(CouplingBounds, HoldOnRandomPairs) {
  RandomSource gen(43);
  const auto reports = coupling_bound_sweep(
      20, [&](std::size_t i) { return random_pair(2 + i % 7, gen); }, 50'000, RandomSource(44));
  for (const auto& r : reports) EXPECT_TRUE(r.pass) << r.name << " value=" << r.value;
}

TEST(RandomPair, SpansTvRange) {
  RandomSource gen(45);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 500; ++i) {
    const auto pq = random_pair(8, gen);
    const double tv = tv_distance(pq.p, pq.q);
    lo = std::min(lo, tv);
    hi = std::max(hi, tv);
  }
  EXPECT_LT(lo, 0.05);
  EXPECT_GT(hi, 0.7);
}

TEST(Pearson, PerfectAndDegenerate) {
  EXPECT_NEAR(*pearson({1, 2, 3, 4}, {2, 4, 6, 8}), 1.0, 1e-15);
  EXPECT_NEAR(*pearson({1, 2, 3, 4}, {8, 6, 4, 2}), -1.0, 1e-15);
  EXPECT_FALSE(pearson({1, 1, 1}, {1, 2, 3}));
  EXPECT_FALSE(pearson({1, 2}, {1}));
}

TEST(PairedTTest, DirectionAndSignificance) {
  const std::vector<double> a{5.1, 6.0, 5.5, 6.2, 5.8, 6.1, 5.9, 6.3};
  const std::vector<double> b{4.0, 4.9, 4.6, 5.0, 4.7, 5.2, 4.8, 5.1};
  const auto t = paired_t_test(a, b);
  EXPECT_GT(t.mean_diff, 0.0);
  EXPECT_LT(t.p_one_sided, 1e-4);
  EXPECT_GT(paired_t_test(b, a).p_one_sided, 0.99);
  EXPECT_THROW(paired_t_test({1.0}, {2.0}), PreconditionError);
}

TEST(PairedTTest, KnownValue) {
  // diffs 1, 2, 3: mean 2, sd 1, se 1/sqrt(3), t = 2*sqrt(3), 2 dof.
  const auto t = paired_t_test({2, 4, 6}, {1, 2, 3});
  EXPECT_NEAR(t.t, 2.0 * std::sqrt(3.0), 1e-12);
  // Student t with 2 dof: P(T > t) = 0.5 * (1 - t / sqrt(t^2 + 2)).
  EXPECT_NEAR(t.p_one_sided, 0.5 * (1 - t.t / std::sqrt(t.t * t.t + 2)), 1e-12);
}

TEST(HammingNfeCorrelation, SkipsDegenerateRuns) {
  const auto m = make_model(4, 1, 1.0);
  SamplingConfig greedy;
  greedy.top_k = 1;
  // Window 1 never has a previous draft, so Hamming is constant.
  const auto r = hamming_nfe_correlation(m, greedy, {8, 1, CouplerKind::Independent, {}}, 100,
                                         RandomSource(0));
  EXPECT_TRUE(r.pass);
  EXPECT_NE(r.notes.find("skipped"), std::string::npos);
}

TEST(LosslessSuite, PassesHonestVerifierAndCatchesSkipResidual) {
  const auto m = make_model(3, 1, 2.0, 1);
  LosslessOptions opt;
  opt.length = 3;
  opt.window = 3;
  opt.trials = 40'000;
  const auto honest = lossless_suite(m, {}, opt, RandomSource(46));
  EXPECT_EQ(honest.size(), 1u + 2 * 7);
  for (const auto& r : honest) EXPECT_TRUE(r.pass) << r.name << " value=" << r.value;
  const auto broken = lossless_suite(m, {}, opt, RandomSource(46), fault::SkipResidual{});
  EXPECT_FALSE(all_pass(broken));
}

}  // namespace
}  // namespace sjd
