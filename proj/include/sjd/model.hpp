#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sjd/error.hpp"
#include "sjd/prob.hpp"
#include "sjd/random.hpp"

namespace sjd {

using TokenSequence = std::vector<Token>;

// Next-token model p(. | prefix). eval_next_uncond is the guidance-free branch
// used for classifier-free guidance.
template <class M>
concept ArModel = requires(const M& m, std::span<const Token> prefix) {
  { m.vocab_size() } -> std::convertible_to<std::size_t>;
  { m.max_length() } -> std::convertible_to<std::size_t>;
  { m.eval_next(prefix) } -> std::same_as<Logits>;
  { m.eval_next_uncond(prefix) } -> std::same_as<Logits>;
};

struct SamplingConfig {
  double temperature = 1.0;
  std::optional<std::size_t> top_k{};
  std::optional<double> top_p{};
  double cfg_scale = 0.0;

  ProcessorOptions processors() const { return {temperature, top_k, top_p}; }

  // Every conditional collapses to a point mass.
  bool is_greedy() const { return top_k && *top_k == 1; }
};

enum class UncondKind { Tabular, Zero };

struct ModelSpec {
  std::size_t vocab_size = 4;
  std::size_t context_order = 1;
  double flatness = 1.0;
  std::uint64_t seed = 1;
  std::size_t max_length = 1024;
  UncondKind uncond_kind = UncondKind::Tabular;
  std::optional<std::uint64_t> uncond_seed{};  // defaults to seed + 1

  std::uint64_t effective_uncond_seed() const { return uncond_seed.value_or(seed + 1); }
};

inline constexpr std::size_t kMaxTableEntries = std::size_t{1} << 24;

// Order-k tabular model. Logits for every (context, token) are i.i.d. standard
// normal under the seed, divided by flatness. Contexts shorter than k are
// left-padded with a begin-of-sequence symbol (id == vocab_size).
class TabularModel {
 public:
  explicit TabularModel(const ModelSpec& spec) : spec_(spec) {
    if (spec.vocab_size < 1) throw PreconditionError("ModelSpec: vocab_size must be >= 1");
    if (!(spec.flatness > 0.0)) throw PreconditionError("ModelSpec: flatness must be > 0");
    if (spec.max_length < 1) throw PreconditionError("ModelSpec: max_length must be >= 1");
    const std::size_t radix = spec.vocab_size + 1;
    contexts_ = 1;
    for (std::size_t i = 0; i < spec.context_order; ++i) {
      if (contexts_ > kMaxTableEntries / radix)
        throw SizeError("ModelSpec: logit table too large; lower context_order or vocab_size");
      contexts_ *= radix;
    }
    if (contexts_ > kMaxTableEntries / spec.vocab_size)
      throw SizeError("ModelSpec: logit table too large; lower context_order or vocab_size");
    cond_ = make_table(spec.seed);
    if (spec.uncond_kind == UncondKind::Tabular)
      uncond_ = make_table(spec.effective_uncond_seed());
    else
      uncond_.assign(cond_.size(), 0.0);
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t vocab_size() const noexcept { return spec_.vocab_size; }
  std::size_t max_length() const noexcept { return spec_.max_length; }
  std::size_t context_count() const noexcept { return contexts_; }

  Logits eval_next(std::span<const Token> prefix) const { return lookup(cond_, prefix); }
  Logits eval_next_uncond(std::span<const Token> prefix) const { return lookup(uncond_, prefix); }

  // Row of the conditional table by context index, for whole-table statistics.
  Logits logits_for_context(std::size_t context) const {
    const std::size_t V = spec_.vocab_size;
    return Logits(std::vector<double>(cond_.begin() + static_cast<std::ptrdiff_t>(context * V),
                                      cond_.begin() + static_cast<std::ptrdiff_t>((context + 1) * V)));
  }

 private:
  std::vector<double> make_table(std::uint64_t seed) const {
    RandomSource rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> t(contexts_ * spec_.vocab_size);
    for (double& v : t) v = normal(rng.engine()) / spec_.flatness;
    return t;
  }

  std::size_t context_index(std::span<const Token> prefix) const {
    const std::size_t V = spec_.vocab_size;
    const std::size_t k = spec_.context_order;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < k; ++i) {
      // i-th oldest symbol of the k-token window ending at the prefix tail.
      const std::ptrdiff_t pos =
          static_cast<std::ptrdiff_t>(prefix.size()) - static_cast<std::ptrdiff_t>(k) +
          static_cast<std::ptrdiff_t>(i);
      std::size_t sym = V;
      if (pos >= 0) {
        const Token t = prefix[static_cast<std::size_t>(pos)];
        if (t < 0 || static_cast<std::size_t>(t) >= V)
          throw PreconditionError("TabularModel: token id out of range");
        sym = static_cast<std::size_t>(t);
      }
      idx = idx * (V + 1) + sym;
    }
    return idx;
  }

  Logits lookup(const std::vector<double>& table, std::span<const Token> prefix) const {
    if (prefix.size() >= spec_.max_length)
      throw LengthError("TabularModel: prefix of length " + std::to_string(prefix.size()) +
                        " reaches max_length " + std::to_string(spec_.max_length));
    const std::size_t V = spec_.vocab_size;
    const auto base = static_cast<std::ptrdiff_t>(context_index(prefix) * V);
    return Logits(std::vector<double>(table.begin() + base,
                                      table.begin() + base + static_cast<std::ptrdiff_t>(V)));
  }

  ModelSpec spec_;
  std::size_t contexts_ = 1;
  std::vector<double> cond_;
  std::vector<double> uncond_;
};

static_assert(ArModel<TabularModel>);

// Logits for each window slot j, conditioned on context + window[0, j).
template <ArModel M>
std::vector<Logits> eval_window(const M& model, std::span<const Token> context,
                                std::span<const Token> window) {
  if (context.size() + window.size() > model.max_length())
    throw LengthError("eval_window: context + window exceeds max_length");
  TokenSequence buf(context.begin(), context.end());
  buf.reserve(context.size() + window.size());
  std::vector<Logits> out;
  out.reserve(window.size());
  for (Token t : window) {
    out.push_back(model.eval_next(buf));
    buf.push_back(t);
  }
  return out;
}

template <ArModel M>
Categorical target_distribution(const M& model, std::span<const Token> prefix,
                                const SamplingConfig& sampling) {
  Logits l = model.eval_next(prefix);
  if (sampling.cfg_scale > 0.0) l = mix_cfg(l, model.eval_next_uncond(prefix), sampling.cfg_scale);
  return apply_processors(l, sampling.processors());
}

// Target laws for every window slot; one parallel model evaluation.
template <ArModel M>
std::vector<Categorical> target_window(const M& model, std::span<const Token> context,
                                       std::span<const Token> window,
                                       const SamplingConfig& sampling) {
  if (context.size() + window.size() > model.max_length())
    throw LengthError("target_window: context + window exceeds max_length");
  TokenSequence buf(context.begin(), context.end());
  buf.reserve(context.size() + window.size());
  std::vector<Categorical> out;
  out.reserve(window.size());
  for (Token t : window) {
    out.push_back(target_distribution(model, buf, sampling));
    buf.push_back(t);
  }
  return out;
}

using SequenceLaw = std::map<TokenSequence, double>;

inline constexpr std::size_t kDefaultEnumerationBudget = 1'000'000;

// Exact law of length-n sequences under sequential sampling. Zero-probability
// sequences are omitted.
template <ArModel M>
SequenceLaw enumerate_sequence_distribution(const M& model, const SamplingConfig& sampling,
                                            std::size_t n,
                                            std::size_t budget = kDefaultEnumerationBudget) {
  const std::size_t V = model.vocab_size();
  std::size_t count = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (count > budget / V)
      throw SizeError("enumerate_sequence_distribution: " + std::to_string(V) + "^" +
                      std::to_string(n) + " sequences exceed budget " + std::to_string(budget));
    count *= V;
  }
  if (n > model.max_length()) throw LengthError("enumerate_sequence_distribution: n > max_length");

  SequenceLaw law;
  TokenSequence prefix;
  prefix.reserve(n);
  auto rec = [&](auto&& self, double mass) -> void {
    if (prefix.size() == n) {
      law.emplace(prefix, mass);
      return;
    }
    const Categorical p = target_distribution(model, prefix, sampling);
    for (std::size_t v = 0; v < V; ++v) {
      if (p.probs()[v] <= 0.0) continue;
      prefix.push_back(static_cast<Token>(v));
      self(self, mass * p.probs()[v]);
      prefix.pop_back();
    }
  };
  rec(rec, 1.0);
  return law;
}

}  // namespace sjd
