#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sjd/couplers.hpp"
#include "sjd/error.hpp"
#include "sjd/model.hpp"
#include "sjd/prob.hpp"
#include "sjd/random.hpp"

namespace sjd {

enum class CouplerKind { Independent, MaximalCoupling, GumbelSharing };

// What happens to the position where verification first rejects.
enum class RejectionMode {
  FinalizeResidual,  // the residual token is emitted; the window moves past it
  RedraftPosition,   // the residual token becomes that position's pinned draft
};

inline std::string_view to_string(CouplerKind k) {
  switch (k) {
    case CouplerKind::Independent: return "independent";
    case CouplerKind::MaximalCoupling: return "maximal";
    case CouplerKind::GumbelSharing: return "gumbel";
  }
  return "?";
}

inline std::string_view to_string(RejectionMode m) {
  return m == RejectionMode::FinalizeResidual ? "finalize" : "redraft";
}

inline std::optional<CouplerKind> parse_coupler(std::string_view s) {
  if (s == "independent") return CouplerKind::Independent;
  if (s == "maximal") return CouplerKind::MaximalCoupling;
  if (s == "gumbel") return CouplerKind::GumbelSharing;
  return std::nullopt;
}

inline std::optional<RejectionMode> parse_rejection(std::string_view s) {
  if (s == "finalize") return RejectionMode::FinalizeResidual;
  if (s == "redraft") return RejectionMode::RedraftPosition;
  return std::nullopt;
}

struct IterationStats {
  std::size_t accepted_count = 0;
  // Drafts that changed versus the previous iteration; empty when no window
  // position had a previous draft.
  std::optional<std::size_t> window_hamming;
  std::size_t compared_positions = 0;
  std::vector<double> betas;
};

struct DecodeStats {
  std::size_t nfe = 0;
  std::size_t total_tokens = 0;
  std::vector<IterationStats> per_iteration;
  // Indexed by absolute position: analytic acceptance probability at each
  // verification of that position whose draft law came from the model.
  std::vector<std::vector<double>> beta_trajectories;

  double mean_accepted_per_iteration() const {
    return per_iteration.empty() ? 0.0
                                 : static_cast<double>(total_tokens) /
                                       static_cast<double>(per_iteration.size());
  }

  std::optional<double> mean_hamming() const {
    double s = 0.0;
    std::size_t k = 0;
    for (const auto& it : per_iteration)
      if (it.window_hamming) {
        s += static_cast<double>(*it.window_hamming);
        ++k;
      }
    if (k == 0) return std::nullopt;
    return s / static_cast<double>(k);
  }

  std::optional<double> mean_beta() const {
    double s = 0.0;
    std::size_t k = 0;
    for (const auto& traj : beta_trajectories)
      for (double b : traj) {
        s += b;
        ++k;
      }
    if (k == 0) return std::nullopt;
    return s / static_cast<double>(k);
  }

  // Within-position variance of beta, pooled over positions with at least two
  // recordings. Returns {sum of squared deviations, degrees of freedom}.
  std::pair<double, std::size_t> beta_within_position_ss() const {
    double ss = 0.0;
    std::size_t dof = 0;
    for (const auto& traj : beta_trajectories) {
      if (traj.size() < 2) continue;
      double mean = 0.0;
      for (double b : traj) mean += b;
      mean /= static_cast<double>(traj.size());
      for (double b : traj) ss += (b - mean) * (b - mean);
      dof += traj.size() - 1;
    }
    return {ss, dof};
  }
};

struct DecodeResult {
  TokenSequence tokens;
  DecodeStats stats;
};

struct WindowSlot {
  std::size_t position = 0;
  Categorical draft_dist;                // law the current draft was drawn from
  Token draft = 0;
  std::optional<Categorical> prev_dist;  // previous iteration's draft law
  Token prev_draft = -1;
  bool model_draft = false;              // draft_dist came from a model evaluation
  bool pinned = false;                   // draft fixed; skip the coupler once
  RandomSource draft_rng;
  RandomSource verify_rng;
  std::optional<GumbelVector> gumbel;
};

struct DecodeState {
  TokenSequence accepted;
  std::deque<WindowSlot> window;
  std::size_t iteration = 0;

  std::size_t window_start() const noexcept { return accepted.size(); }
};

// Analytic acceptance probability 1 - TV(evaluated, draft law) for each window
// slot whose draft law is itself a model output; empty entries are skipped.
inline std::vector<std::optional<double>> record_beta(const DecodeState& state,
                                                      std::span<const Categorical> evaluated) {
  std::vector<std::optional<double>> out(state.window.size());
  for (std::size_t j = 0; j < state.window.size() && j < evaluated.size(); ++j) {
    const WindowSlot& s = state.window[j];
    if (s.model_draft) out[j] = 1.0 - tv_distance(evaluated[j], s.draft_dist);
  }
  return out;
}

// Number of window drafts that differ from the previous iteration's draft at
// the same position; empty if no slot has a previous draft.
inline std::optional<std::size_t> record_hamming(const DecodeState& state) {
  std::size_t compared = 0;
  std::size_t changed = 0;
  for (const WindowSlot& s : state.window) {
    if (!s.prev_dist || s.pinned) continue;
    ++compared;
    if (s.draft != s.prev_draft) ++changed;
  }
  if (compared == 0) return std::nullopt;
  return changed;
}

template <ArModel M>
DecodeResult decode_vanilla(const M& model, const SamplingConfig& sampling, std::size_t n,
                            const RandomSource& rng) {
  if (n > model.max_length()) throw LengthError("decode_vanilla: n exceeds max_length");
  DecodeResult out;
  out.tokens.reserve(n);
  out.stats.total_tokens = n;
  out.stats.beta_trajectories.resize(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const Categorical p = target_distribution(model, out.tokens, sampling);
    RandomSource draw = rng.derive({stream::kDraft, pos});
    out.tokens.push_back(sample_independent(p, draw));
    ++out.stats.nfe;
    out.stats.per_iteration.push_back(IterationStats{1, std::nullopt, 0, {}});
  }
  return out;
}

struct SjdOptions {
  std::size_t length = 0;
  std::size_t window = 1;
  CouplerKind coupler = CouplerKind::Independent;
  RejectionMode rejection = RejectionMode::FinalizeResidual;
};

namespace detail {

inline WindowSlot enter_window(std::size_t pos, std::size_t vocab, CouplerKind coupler,
                               const RandomSource& rng) {
  WindowSlot s{pos,
               Categorical::uniform(vocab),
               0,
               std::nullopt,
               -1,
               false,
               false,
               rng.derive({stream::kDraft, pos}),
               rng.derive({stream::kVerify, pos}),
               std::nullopt};
  RandomSource init = rng.derive({stream::kInit, pos});
  s.draft = sample_independent(s.draft_dist, init);
  if (coupler == CouplerKind::GumbelSharing) {
    RandomSource g = rng.derive({stream::kGumbel, pos});
    s.gumbel = sample_gumbel_noise(vocab, g);
  }
  return s;
}

inline void draft_slot(WindowSlot& s, CouplerKind coupler) {
  if (s.pinned || !s.prev_dist) return;
  switch (coupler) {
    case CouplerKind::Independent:
      s.draft = sample_independent(s.draft_dist, s.draft_rng);
      break;
    case CouplerKind::MaximalCoupling:
      s.draft = mrs(s.draft_dist, *s.prev_dist, s.prev_draft, s.draft_rng).token;
      break;
    case CouplerKind::GumbelSharing:
      s.draft = gs_couple(s.draft_dist, *s.prev_dist, *s.gumbel).first;
      break;
  }
}

}  // namespace detail

// Speculative Jacobi decoding with a pluggable draft coupler.
//
// Each iteration drafts every window slot through the coupler, evaluates the
// whole window in one model call, then verifies slots left to right with the
// verifier until the first rejection.
template <ArModel M, class Verifier = ModifiedRejection>
DecodeResult decode_sjd(const M& model, const SamplingConfig& sampling, const SjdOptions& opt,
                        const RandomSource& rng, const Verifier& verify = Verifier{}) {
  const std::size_t n = opt.length;
  if (opt.window < 1) throw PreconditionError("decode_sjd: window must be >= 1");
  if (n > model.max_length()) throw LengthError("decode_sjd: n exceeds max_length");
  const std::size_t V = model.vocab_size();

  DecodeState state;
  state.accepted.reserve(n);
  DecodeResult out;
  out.stats.total_tokens = n;
  out.stats.beta_trajectories.resize(n);
  std::vector<Token> drafts;

  while (state.accepted.size() < n) {
    const std::size_t target_width = std::min(opt.window, n - state.accepted.size());
    while (state.window.size() < target_width)
      state.window.push_back(detail::enter_window(state.window_start() + state.window.size(), V,
                                                  opt.coupler, rng));

    IterationStats it;
    for (WindowSlot& s : state.window) detail::draft_slot(s, opt.coupler);
    it.window_hamming = record_hamming(state);
    for (const WindowSlot& s : state.window)
      if (s.prev_dist && !s.pinned) ++it.compared_positions;

    drafts.clear();
    for (const WindowSlot& s : state.window) drafts.push_back(s.draft);
    std::vector<Categorical> evaluated = target_window(model, state.accepted, drafts, sampling);
    ++out.stats.nfe;

    const auto betas = record_beta(state, evaluated);
    for (std::size_t j = 0; j < betas.size(); ++j)
      if (betas[j]) {
        it.betas.push_back(*betas[j]);
        out.stats.beta_trajectories[state.window[j].position].push_back(*betas[j]);
      }

    std::size_t finalized = 0;
    std::optional<std::size_t> rejected_at;
    for (std::size_t j = 0; j < state.window.size(); ++j) {
      WindowSlot& s = state.window[j];
      const MrsOutcome r = verify(evaluated[j], s.draft_dist, s.draft, s.verify_rng);
      if (r.accepted) {
        state.accepted.push_back(r.token);
        ++finalized;
        continue;
      }
      rejected_at = j;
      if (opt.rejection == RejectionMode::FinalizeResidual) {
        state.accepted.push_back(r.token);
        ++finalized;
      } else {
        s.draft_dist = evaluated[j];
        s.draft = r.token;
        s.prev_dist.reset();
        s.prev_draft = -1;
        s.model_draft = true;
        s.pinned = true;
      }
      break;
    }

    const std::size_t carry_from = rejected_at ? *rejected_at + 1 : state.window.size();
    for (std::size_t j = carry_from; j < state.window.size(); ++j) {
      WindowSlot& s = state.window[j];
      s.prev_dist = std::move(s.draft_dist);
      s.prev_draft = s.draft;
      s.draft_dist = std::move(evaluated[j]);
      s.model_draft = true;
      s.pinned = false;
    }
    // Under RedraftPosition the pinned slot is now at the front; its target law
    // is unchanged, so it is accepted on the next pass.
    for (std::size_t j = 0; j < finalized; ++j) state.window.pop_front();

    it.accepted_count = finalized;
    out.stats.per_iteration.push_back(std::move(it));
    ++state.iteration;
  }

  out.tokens = std::move(state.accepted);
  return out;
}

}  // namespace sjd
