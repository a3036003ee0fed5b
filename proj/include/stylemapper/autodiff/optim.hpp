#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylemapper/autodiff/tensor.hpp"

namespace stylemapper::ad {

// Named, ordered collection of trainable tensors.
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
  };

  Tensor<T> add(std::string name, Tensor<T> t) {
    for (const auto& e : entries_) {
      if (e.name == name) throw std::invalid_argument("duplicate parameter name " + name);
    }
    entries_.push_back({std::move(name), t});
    return t;
  }

  const Tensor<T>& get(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return e.tensor;
    }
    throw std::out_of_range("no parameter named " + name);
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
  }

  bool all_finite() const {
    for (const auto& e : entries_) {
      for (T v : e.tensor.values()) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

 private:
  std::vector<Entry> entries_;
};

// Normal(0, sqrt(2 / fan_in)) samples.
template <typename T, class Rng>
Tensor<T> kaiming_init(Shape shape, std::size_t fan_in, Rng& rng, bool requires_grad = true) {
  if (fan_in < 1) throw std::invalid_argument("kaiming_init: fan_in must be >= 1");
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  std::vector<T> v(numel(shape));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return Tensor<T>::from(std::move(v), std::move(shape), requires_grad);
}

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

// One Adam update with bias correction. Weight decay enters as +lambda*theta in the gradient.
// Moments are kept in double so float and double parameter sets follow the same recurrence.
template <typename T>
void adam_step(ParameterSet<T>& params, AdamState& state, const AdamConfig& cfg) {
  auto& entries = params.entries();
  if (state.m.empty()) {
    for (const auto& e : entries) {
      state.m.emplace_back(e.tensor.size(), 0.0);
      state.v.emplace_back(e.tensor.size(), 0.0);
    }
  }
  if (state.m.size() != entries.size()) throw std::invalid_argument("adam_step: state does not match parameters");
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& t = entries[k].tensor;
    if (state.m[k].size() != t.size()) throw std::invalid_argument("adam_step: state shape mismatch for " + entries[k].name);
    if (!t.has_grad()) continue;
    for (T g : t.grad()) {
      if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient in " + entries[k].name);
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto& t = entries[k].tensor;
    auto& vals = t.mutable_values();
    const bool has = t.has_grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double g = (has ? static_cast<double>(t.grad()[i]) : 0.0) + cfg.weight_decay * static_cast<double>(vals[i]);
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      vals[i] = static_cast<T>(static_cast<double>(vals[i]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

}  // namespace stylemapper::ad
