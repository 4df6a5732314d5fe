#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sjd/error.hpp"

namespace sjd {

using Token = std::int32_t;

inline constexpr double kNormTolerance = 1e-9;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Probability vector over a finite vocabulary. Immutable once built.
class Categorical {
 public:
  // Accepts vectors summing to 1 within kNormTolerance and renormalizes them.
  explicit Categorical(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw PreconditionError("Categorical: empty vocabulary");
    double sum = 0.0;
    for (double v : probs_) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw PreconditionError("Categorical: entries must be finite and non-negative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kNormTolerance)
      throw PreconditionError("Categorical: entries sum to " + std::to_string(sum));
    for (double& v : probs_) v /= sum;
  }

  // Normalizes arbitrary non-negative mass. Throws ZeroMassError on all-zero input.
  static Categorical from_weights(std::vector<double> weights) {
    double sum = 0.0;
    for (double v : weights) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw PreconditionError("Categorical::from_weights: bad weight");
      sum += v;
    }
    if (!(sum > 0.0)) throw ZeroMassError("Categorical::from_weights: zero total mass");
    for (double& v : weights) v /= sum;
    return Categorical(std::move(weights), Normalized{});
  }

  static Categorical uniform(std::size_t vocab_size) {
    if (vocab_size == 0) throw PreconditionError("Categorical::uniform: empty vocabulary");
    return Categorical(std::vector<double>(vocab_size, 1.0 / static_cast<double>(vocab_size)),
                       Normalized{});
  }

  static Categorical point_mass(std::size_t vocab_size, Token at) {
    if (at < 0 || static_cast<std::size_t>(at) >= vocab_size)
      throw PreconditionError("Categorical::point_mass: token out of range");
    std::vector<double> v(vocab_size, 0.0);
    v[static_cast<std::size_t>(at)] = 1.0;
    return Categorical(std::move(v), Normalized{});
  }

  std::size_t vocab_size() const noexcept { return probs_.size(); }
  std::span<const double> probs() const& noexcept { return probs_; }
  std::span<const double> probs() const&& = delete;
  double operator[](Token t) const { return probs_[static_cast<std::size_t>(t)]; }
  double at(Token t) const {
    if (t < 0 || static_cast<std::size_t>(t) >= probs_.size())
      throw PreconditionError("Categorical::at: token out of range");
    return probs_[static_cast<std::size_t>(t)];
  }

  friend bool operator==(const Categorical&, const Categorical&) = default;

 private:
  struct Normalized {};
  Categorical(std::vector<double> probs, Normalized) : probs_(std::move(probs)) {}

  std::vector<double> probs_;
};

// Unnormalized log-odds. -inf marks a masked token.
class Logits {
 public:
  explicit Logits(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw PreconditionError("Logits: empty vocabulary");
    bool any_live = false;
    for (double v : values_) {
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
        throw PreconditionError("Logits: entries must be finite or -inf");
      any_live = any_live || v > kNegInf;
    }
    if (!any_live) throw PreconditionError("Logits: every token is masked");
  }

  std::size_t vocab_size() const noexcept { return values_.size(); }
  std::span<const double> values() const& noexcept { return values_; }
  std::span<const double> values() const&& = delete;
  double operator[](Token t) const { return values_[static_cast<std::size_t>(t)]; }

  friend bool operator==(const Logits&, const Logits&) = default;

 private:
  std::vector<double> values_;
};

namespace detail {

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw DimensionError(std::string(what) + ": vocab sizes differ (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
}

}  // namespace detail

inline double tv_distance(const Categorical& p, const Categorical& q) {
  detail::require_same_size(p.vocab_size(), q.vocab_size(), "tv_distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.vocab_size(); ++i) acc += std::abs(p.probs()[i] - q.probs()[i]);
  return std::clamp(0.5 * acc, 0.0, 1.0);
}

// Renyi entropy of order 2, in nats.
inline double renyi2_entropy(const Categorical& p) {
  double s = 0.0;
  for (double v : p.probs()) s += v * v;
  return -std::log(s);
}

// Pr[X = Y] for independent X ~ p, Y ~ q.
inline double independent_collision(const Categorical& p, const Categorical& q) {
  detail::require_same_size(p.vocab_size(), q.vocab_size(), "independent_collision");
  double s = 0.0;
  for (std::size_t i = 0; i < p.vocab_size(); ++i) s += p.probs()[i] * q.probs()[i];
  return s;
}

// norm(max(0, p - q)). Throws ZeroMassError when p == q.
inline Categorical residual_distribution(const Categorical& p, const Categorical& q) {
  detail::require_same_size(p.vocab_size(), q.vocab_size(), "residual_distribution");
  std::vector<double> w(p.vocab_size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::max(0.0, p.probs()[i] - q.probs()[i]);
  return Categorical::from_weights(std::move(w));
}

// Classifier-free guidance: (1 + scale) * cond - scale * uncond.
inline Logits mix_cfg(const Logits& cond, const Logits& uncond, double scale) {
  detail::require_same_size(cond.vocab_size(), uncond.vocab_size(), "mix_cfg");
  if (!(scale >= 0.0)) throw PreconditionError("mix_cfg: scale must be >= 0");
  if (scale == 0.0) return cond;
  std::vector<double> out(cond.vocab_size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double c = cond.values()[i];
    const double u = uncond.values()[i];
    if (c == kNegInf || u == kNegInf) {
      if (c != u) throw PreconditionError("mix_cfg: masked positions disagree");
      out[i] = kNegInf;
    } else {
      out[i] = (1.0 + scale) * c - scale * u;
    }
  }
  return Logits(std::move(out));
}

inline Categorical softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> w(logits.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = logits[i] == kNegInf ? 0.0 : std::exp(logits[i] - mx);
  return Categorical::from_weights(std::move(w));
}

inline Categorical softmax(const Logits& l) { return softmax(l.values()); }

struct ProcessorOptions {
  double temperature = 1.0;
  std::optional<std::size_t> top_k{};
  std::optional<double> top_p{};
};

// temperature -> top-k -> top-p -> softmax.
inline Categorical apply_processors(const Logits& l, const ProcessorOptions& opt) {
  const std::size_t V = l.vocab_size();
  if (!(opt.temperature > 0.0)) throw PreconditionError("apply_processors: temperature must be > 0");
  if (opt.top_k && (*opt.top_k < 1 || *opt.top_k > V))
    throw PreconditionError("apply_processors: top_k out of range");
  if (opt.top_p && !(*opt.top_p > 0.0 && *opt.top_p <= 1.0))
    throw PreconditionError("apply_processors: top_p must lie in (0, 1]");

  std::vector<double> x(l.values().begin(), l.values().end());
  for (double& v : x)
    if (v != kNegInf) v /= opt.temperature;

  // Descending by logit, lower token id first on ties.
  auto by_rank = [&x] {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&x](std::size_t a, std::size_t b) { return x[a] > x[b]; });
    return order;
  };

  if (opt.top_k && *opt.top_k < V) {
    const auto order = by_rank();
    for (std::size_t r = *opt.top_k; r < V; ++r) x[order[r]] = kNegInf;
  }

  if (opt.top_p && *opt.top_p < 1.0) {
    const Categorical pre = softmax(x);
    const auto order = by_rank();
    double cum = 0.0;
    std::size_t keep = 0;
    while (keep < V) {
      cum += pre.probs()[order[keep]];
      ++keep;
      if (cum >= *opt.top_p) break;
    }
    for (std::size_t r = keep; r < V; ++r) x[order[r]] = kNegInf;
  }

  return softmax(x);
}

}  // namespace sjd
