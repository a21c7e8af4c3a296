#pragma once
#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

#include "emu/core.hpp"

namespace emu {

// Opaque model state (a graph, a point pattern, ...).  Samplers only clone
// and pass these around; concrete models downcast internally.
struct ModelData {
  virtual ~ModelData() = default;
  virtual std::unique_ptr<ModelData> clone() const = 0;
};
using DataPtr = std::unique_ptr<ModelData>;

// A probability model known only through its unnormalized density h(x|theta)
// and an MCMC sampler targeting h(.|theta)/Z(theta).  This is the whole
// surface the inference layers need; the normalizing constant Z is never
// requested from the model.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual int param_dim() const = 0;

  // log h(x|theta); may be -inf (zero density), never NaN.
  virtual double log_h(const ModelData& x, const Vector& theta) const = 0;

  // Fresh starting state for an independent sampler chain targeting theta
  // (models may ignore theta).
  virtual DataPtr initial_state(const Vector& theta, RngStream& rng) const = 0;

  // Advances x in place by `cycles` sampler cycles targeting theta.
  // Counts invocations so tests can verify which phases touch the sampler.
  void advance(ModelData& x, const Vector& theta, int cycles,
               RngStream& rng) const {
    advance_calls_.fetch_add(1, std::memory_order_relaxed);
    do_advance(x, theta, cycles, rng);
  }
  std::int64_t advance_calls() const {
    return advance_calls_.load(std::memory_order_relaxed);
  }

  // Low-dimensional summary statistics, when the model defines them.
  virtual bool has_summary() const { return false; }
  virtual Vector summary(const ModelData&) const {
    throw ValidationError(name() + ": no summary statistics defined");
  }
  // True when log_h(x, theta) == theta . summary(x); lets the importance
  // sampler cache summaries instead of full states.
  virtual bool linear_in_summary() const { return false; }

 protected:
  virtual void do_advance(ModelData& x, const Vector& theta, int cycles,
                          RngStream& rng) const = 0;

 private:
  mutable std::atomic<std::int64_t> advance_calls_{0};
};

}  // namespace emu
