#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sjd/error.hpp"
#include "sjd/prob.hpp"
#include "sjd/random.hpp"

namespace sjd {

// Inverse-CDF draw for a fixed uniform u in [0, 1). Zero-probability tokens
// are never returned.
inline Token sample_at(const Categorical& p, double u) {
  const auto probs = p.probs();
  double cum = 0.0;
  Token last_live = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_live = static_cast<Token>(i);
    cum += probs[i];
    if (u < cum) return last_live;
  }
  // Rounding left cum slightly below 1.
  return last_live;
}

inline Token sample_independent(const Categorical& p, RandomSource& rng) {
  return sample_at(p, rng.uniform01());
}

struct MrsOutcome {
  bool accepted = false;
  Token token = 0;

  friend bool operator==(const MrsOutcome&, const MrsOutcome&) = default;
};

// Modified rejection sampling: x ~ q in, a p-distributed token out.
//
// Consumes one uniform for the accept test and, on rejection, exactly one more
// for the residual draw.
inline MrsOutcome mrs(const Categorical& p, const Categorical& q, Token x, RandomSource& rng) {
  detail::require_same_size(p.vocab_size(), q.vocab_size(), "mrs");
  const double qx = q.at(x);
  if (!(qx > 0.0)) throw PreconditionError("mrs: draft token has zero draft probability");
  const double ratio = std::min(1.0, p[x] / qx);
  const double u = rng.uniform01();
  if (u < ratio) return {true, x};

  std::vector<double> w(p.vocab_size());
  double mass = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::max(0.0, p.probs()[i] - q.probs()[i]);
    mass += w[i];
  }
  if (!(mass > 0.0)) return {true, x};  // p == q up to rounding
  return {false, sample_at(Categorical::from_weights(std::move(w)), rng.uniform01())};
}

// Functor form of mrs, the default verifier of the Jacobi decoder.
struct ModifiedRejection {
  MrsOutcome operator()(const Categorical& p, const Categorical& q, Token x,
                        RandomSource& rng) const {
    return mrs(p, q, x, rng);
  }
};

class GumbelVector {
 public:
  explicit GumbelVector(std::vector<double> noise) : noise_(std::move(noise)) {
    for (double g : noise_)
      if (!std::isfinite(g)) throw PreconditionError("GumbelVector: non-finite entry");
  }
  std::size_t size() const noexcept { return noise_.size(); }
  std::span<const double> values() const noexcept { return noise_; }
  double operator[](std::size_t i) const { return noise_[i]; }

 private:
  std::vector<double> noise_;
};

// -log(-log(u)) with u clamped into the open unit interval.
inline double gumbel_from_uniform(double u) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  u = std::clamp(u, lo, hi);
  return -std::log(-std::log(u));
}

inline GumbelVector sample_gumbel_noise(std::size_t vocab_size, RandomSource& rng) {
  if (vocab_size == 0) throw PreconditionError("sample_gumbel_noise: empty vocabulary");
  std::vector<double> g(vocab_size);
  for (double& v : g) v = gumbel_from_uniform(rng.uniform01());
  return GumbelVector(std::move(g));
}

namespace detail {

inline Token gumbel_argmax(const Categorical& p, const GumbelVector& g) {
  Token best = -1;
  double best_score = kNegInf;
  for (std::size_t i = 0; i < p.vocab_size(); ++i) {
    if (p.probs()[i] <= 0.0) continue;
    const double score = std::log(p.probs()[i]) + g[i];
    if (best < 0 || score > best_score) {
      best = static_cast<Token>(i);
      best_score = score;
    }
  }
  return best;
}

}  // namespace detail

// Gumbel-max coupling: both tokens are argmaxes under the same noise.
inline std::pair<Token, Token> gs_couple(const Categorical& p, const Categorical& q,
                                         const GumbelVector& g) {
  detail::require_same_size(p.vocab_size(), q.vocab_size(), "gs_couple");
  detail::require_same_size(p.vocab_size(), g.size(), "gs_couple");
  return {detail::gumbel_argmax(p, g), detail::gumbel_argmax(q, g)};
}

inline double maximal_coupling_cost(const Categorical& p, const Categorical& q) {
  return 1.0 - tv_distance(p, q);
}

// Dense V x V table, row = draft token x, column = output token y.
class JointTable {
 public:
  explicit JointTable(std::size_t n) : n_(n), cells_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t x, std::size_t y) { return cells_[x * n_ + y]; }
  double operator()(std::size_t x, std::size_t y) const { return cells_[x * n_ + y]; }

  std::vector<double> row_sums() const {
    std::vector<double> out(n_, 0.0);
    for (std::size_t x = 0; x < n_; ++x)
      for (std::size_t y = 0; y < n_; ++y) out[x] += (*this)(x, y);
    return out;
  }
  std::vector<double> column_sums() const {
    std::vector<double> out(n_, 0.0);
    for (std::size_t x = 0; x < n_; ++x)
      for (std::size_t y = 0; y < n_; ++y) out[y] += (*this)(x, y);
    return out;
  }
  double diagonal_mass() const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += (*this)(i, i);
    return s;
  }

 private:
  std::size_t n_;
  std::vector<double> cells_;
};

inline constexpr std::size_t kDefaultJointBudget = 1'000'000;

// Exact joint law of (draft x ~ q, mrs output y).
inline JointTable mrs_joint_distribution(const Categorical& p, const Categorical& q,
                                         std::size_t cell_budget = kDefaultJointBudget) {
  detail::require_same_size(p.vocab_size(), q.vocab_size(), "mrs_joint_distribution");
  const std::size_t V = p.vocab_size();
  if (V > cell_budget / V)
    throw SizeError("mrs_joint_distribution: " + std::to_string(V) + "^2 cells exceed budget");

  std::vector<double> residual(V, 0.0);
  double mass = 0.0;
  for (std::size_t i = 0; i < V; ++i) {
    residual[i] = std::max(0.0, p.probs()[i] - q.probs()[i]);
    mass += residual[i];
  }
  if (mass > 0.0)
    for (double& r : residual) r /= mass;

  JointTable f(V);
  for (std::size_t x = 0; x < V; ++x) {
    const double qx = q.probs()[x];
    if (qx <= 0.0) continue;
    const double alpha = std::min(1.0, p.probs()[x] / qx);
    f(x, x) += qx * alpha;
    for (std::size_t y = 0; y < V; ++y) f(x, y) += qx * (1.0 - alpha) * residual[y];
  }
  return f;
}

}  // namespace sjd
