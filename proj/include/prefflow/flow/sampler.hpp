#pragma once

#include <filesystem>
#include <span>

#include "prefflow/flow/field.hpp"

namespace prefflow::flow {

// One rollout. Flow time runs noise -> data over a uniform grid
// t_k = k/T, k = 0..T; states has T+1 entries, the per-step arrays have T.
// Step k is the Gaussian transition N(means[k], variances[k] * I) from
// states[k] to states[k+1]. ODE rollouts are flagged !stochastic and carry
// no log-probabilities.
struct Trajectory {
    Condition condition;
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> means;
    std::vector<double> variances;  // isotropic, one scalar per step
    std::vector<double> logprobs;   // NaN on zero-variance steps
    bool stochastic = false;

    size_t steps() const { return means.size(); }
    size_t dim() const { return states.empty() ? 0 : states.front().size(); }
    const Vec& terminal() const { return states.back(); }
};

// log N(x_next; mean, variance * I), summed over dimensions.
double transition_logprob(std::span<const double> x_next, std::span<const double> mean,
                          double variance);

// Stochastic-sampler drift in the time variable of the underlying
// noising process (singular at t = 0):
//   v + sigma_t^2/(2t) * (x + (1-t) v)
// t = 0 with sigma_t = 0 degenerates to v; t = 0 with sigma_t > 0 throws.
Vec sde_drift(const Vec& v, const Vec& x, double t, double sigma_t);

// The same drift expressed in flow time s (noise at s=0, data at s=1). The
// two time conventions are mirrors, s = 1 - t, and the velocity flips sign
// with the direction of travel; marginals of the s-forward SDE then match
// the ODE flow. The mapped form is regular at s = 0 and singular only at
// s = 1, which the samplers' left-endpoint grid never evaluates.
Vec sampler_drift(const Vec& v, const Vec& x, double s, double sigma);

// d(mean)/d(velocity) of one Euler-Maruyama step, used by objective
// backprop: dt * (1 + s * sigma^2 / (2 (1-s))).
double mean_velocity_gain(double s, double sigma, double dt);

// Euler integration of dx = v dt, T uniform steps.
Trajectory ode_sample(const VelocityField& field, Vec x0, const Condition& cond, size_t steps);

// Euler-Maruyama integration of the marginal-preserving SDE:
//   x_{k+1} ~ N(x_k + sampler_drift * dt, sigma(t_k)^2 * dt * I).
// Deterministic given the Rng stream. With sigma == 0 everywhere this
// reproduces ode_sample state-for-state.
Trajectory sde_sample(const VelocityField& field, Vec x0, const Condition& cond, size_t steps,
                      const NoiseSchedule& schedule, Rng& rng);

// Columns: traj_id,step,t,dim0..dimN,logprob (nan where undefined).
void write_trajectories_csv(const std::filesystem::path& path,
                            std::span<const Trajectory> trajectories);

}  // namespace prefflow::flow
