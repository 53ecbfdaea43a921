#pragma once

#include <functional>
#include <span>

#include "prefflow/flow/field.hpp"
#include "prefflow/flow/sampler.hpp"

namespace prefflow::flow {

// One training item: base sample, data sample, interpolation time and the
// condition embedding (empty for unconditional fields).
struct FlowSample {
    Vec x0;
    Vec x1;
    double t = 0.0;
    Vec cond;
};

// Mean over the batch of |v(x_t, t, c) - (x1 - x0)|^2 where
// x_t = (1-t) x0 + t x1. Throws on an empty batch.
double flow_matching_loss(const VelocityField& field, std::span<const FlowSample> batch);

// Same value, plus d(loss)/d(params) written into grad (resized & zeroed).
double flow_matching_loss(const MlpField& field, std::span<const FlowSample> batch,
                          std::vector<double>& grad);

// Fills x0 (base), x1 (data) and cond for one training item.
using PairSampler = std::function<void(Rng&, Vec& x0, Vec& x1, Vec& cond)>;

struct TrainConfig {
    size_t steps = 2000;
    size_t batch = 256;
    double lr = 0.02;
    double momentum = 0.9;
    uint64_t seed = 1;

    void validate() const;
};

struct LossRecord {
    size_t step;
    double loss;
};

struct TrainResult {
    std::vector<LossRecord> curve;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

// Momentum SGD on the flow-matching loss. Interpolation times are drawn
// uniformly per item. Deterministic given the seed; a non-finite loss or
// gradient aborts with the offending step in the message.
TrainResult train_flow(MlpField& field, const PairSampler& sampler, const TrainConfig& cfg);

void write_loss_csv(const std::filesystem::path& path, std::span<const LossRecord> curve);

// Isotropic Gaussian mixture target for the desk-scale tasks.
struct GaussMode {
    Vec center;
    double stddev = 0.3;
    double weight = 1.0;
};

struct GaussMixture {
    std::vector<GaussMode> modes;

    size_t dim() const;
    Vec sample(Rng& rng) const;
    void validate() const;
};

// x0 ~ N(0, I), x1 ~ mixture; cond is copied from `cond` verbatim.
PairSampler mixture_pair_sampler(GaussMixture mixture, Vec cond = {});

// Terminal points of n ODE (or SDE) rollouts from x0 ~ N(0, I).
std::vector<Vec> sample_terminals(const VelocityField& field, size_t n, size_t steps,
                                  const Condition& cond, uint64_t seed,
                                  const NoiseSchedule* schedule = nullptr, unsigned threads = 1);

// Fraction of points whose nearest mode center is centers[0].
double nearest_mode_fraction(std::span<const Vec> points, std::span<const Vec> centers);

}  // namespace prefflow::flow
