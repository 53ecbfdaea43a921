#include "prefflow/flow/sampler.hpp"

#include <cmath>
#include <limits>

#include "prefflow/common/util.hpp"

namespace prefflow::flow {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

void check_state_finite(const Vec& x, size_t step) {
    if (!all_finite(x))
        throw FlowError("non-finite state at step " + std::to_string(step));
}
}  // namespace

double transition_logprob(std::span<const double> x_next, std::span<const double> mean,
                          double variance) {
    if (x_next.size() != mean.size()) throw FlowError("transition_logprob: dimension mismatch");
    if (!(variance > 0.0))
        throw FlowError("transition_logprob: variance must be positive, got " +
                        fmt_double(variance));
    const double log_var = std::log(variance);
    double acc = 0.0;
    for (size_t i = 0; i < x_next.size(); ++i) {
        const double d = x_next[i] - mean[i];
        acc += -0.5 * (kLogTwoPi + log_var + d * d / variance);
    }
    return acc;
}

Vec sde_drift(const Vec& v, const Vec& x, double t, double sigma_t) {
    if (v.size() != x.size()) throw FlowError("sde_drift: dimension mismatch");
    if (sigma_t == 0.0) return v;
    if (t == 0.0) throw FlowError("sde_drift: t = 0 with sigma > 0 is singular");
    const double coef = sigma_t * sigma_t / (2.0 * t);
    Vec out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] + coef * (x[i] + (1.0 - t) * v[i]);
    return out;
}

Vec sampler_drift(const Vec& v, const Vec& x, double s, double sigma) {
    if (sigma == 0.0) return v;
    Vec flipped(v.size());
    for (size_t i = 0; i < v.size(); ++i) flipped[i] = -v[i];
    Vec drift = sde_drift(flipped, x, 1.0 - s, sigma);
    for (double& d : drift) d = -d;
    return drift;
}

double mean_velocity_gain(double s, double sigma, double dt) {
    if (sigma == 0.0) return dt;
    return dt * (1.0 + s * sigma * sigma / (2.0 * (1.0 - s)));
}

Trajectory ode_sample(const VelocityField& field, Vec x0, const Condition& cond, size_t steps) {
    if (steps < 1) throw FlowError("ode_sample: need at least one step");
    if (x0.size() != field.dim()) throw FlowError("ode_sample: x0 dimension mismatch");
    const size_t d = field.dim();
    const double dt = 1.0 / static_cast<double>(steps);

    Trajectory traj;
    traj.condition = cond;
    traj.stochastic = false;
    traj.times.reserve(steps + 1);
    traj.states.reserve(steps + 1);
    traj.means.reserve(steps);
    traj.variances.assign(steps, 0.0);

    check_state_finite(x0, 0);
    traj.times.push_back(0.0);
    traj.states.push_back(std::move(x0));
    Vec v(d);
    for (size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Vec& x = traj.states.back();
        field.eval(x, t, cond.embedding, v);
        Vec next(d);
        for (size_t i = 0; i < d; ++i) next[i] = x[i] + v[i] * dt;
        check_state_finite(next, k + 1);
        traj.means.push_back(next);
        traj.times.push_back(static_cast<double>(k + 1) * dt);
        traj.states.push_back(std::move(next));
    }
    return traj;
}

Trajectory sde_sample(const VelocityField& field, Vec x0, const Condition& cond, size_t steps,
                      const NoiseSchedule& schedule, Rng& rng) {
    if (steps < 1) throw FlowError("sde_sample: need at least one step");
    if (x0.size() != field.dim()) throw FlowError("sde_sample: x0 dimension mismatch");
    const size_t d = field.dim();
    const double dt = 1.0 / static_cast<double>(steps);
    const double sqrt_dt = std::sqrt(dt);

    Trajectory traj;
    traj.condition = cond;
    traj.times.reserve(steps + 1);
    traj.states.reserve(steps + 1);
    traj.means.reserve(steps);
    traj.variances.reserve(steps);
    traj.logprobs.reserve(steps);

    check_state_finite(x0, 0);
    traj.times.push_back(0.0);
    traj.states.push_back(std::move(x0));
    Vec v(d);
    for (size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const double sigma = schedule.sigma(t);
        const Vec& x = traj.states.back();
        field.eval(x, t, cond.embedding, v);
        const Vec drift = sampler_drift(v, x, t, sigma);
        Vec mean(d);
        for (size_t i = 0; i < d; ++i) mean[i] = x[i] + drift[i] * dt;
        const double variance = sigma * sigma * dt;
        Vec next(d);
        if (variance > 0.0) {
            for (size_t i = 0; i < d; ++i) next[i] = mean[i] + sigma * sqrt_dt * rng.gaussian();
            traj.logprobs.push_back(transition_logprob(next, mean, variance));
            traj.stochastic = true;
        } else {
            next = mean;
            traj.logprobs.push_back(std::numeric_limits<double>::quiet_NaN());
        }
        check_state_finite(next, k + 1);
        traj.means.push_back(std::move(mean));
        traj.variances.push_back(variance);
        traj.times.push_back(static_cast<double>(k + 1) * dt);
        traj.states.push_back(std::move(next));
    }
    return traj;
}

void write_trajectories_csv(const std::filesystem::path& path,
                            std::span<const Trajectory> trajectories) {
    const size_t d = trajectories.empty() ? 0 : trajectories.front().dim();
    std::vector<std::string> header{"traj_id", "step", "t"};
    for (size_t i = 0; i < d; ++i) header.push_back("dim" + std::to_string(i));
    header.push_back("logprob");
    CsvWriter csv(path, header);
    for (size_t id = 0; id < trajectories.size(); ++id) {
        const Trajectory& traj = trajectories[id];
        for (size_t k = 0; k < traj.states.size(); ++k) {
            std::vector<std::string> fields{std::to_string(id), std::to_string(k),
                                            fmt_double(traj.times[k])};
            for (double c : traj.states[k]) fields.push_back(fmt_double(c));
            const bool has_lp = k > 0 && traj.stochastic && k - 1 < traj.logprobs.size();
            fields.push_back(has_lp ? fmt_double(traj.logprobs[k - 1]) : "nan");
            csv.row(fields);
        }
    }
    csv.flush();
}

}  // namespace prefflow::flow
