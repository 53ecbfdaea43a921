#include "prefflow/flow/train.hpp"

#include <cmath>

#include "prefflow/common/util.hpp"
#include "prefflow/kern/kernels.hpp"

namespace prefflow::flow {

namespace {

double batch_loss(const VelocityField& field, std::span<const FlowSample> batch,
                  const MlpField* trainable, std::vector<double>* grad) {
    if (batch.empty()) throw FlowError("flow_matching_loss: empty batch");
    const size_t d = field.dim();
    MlpField::Workspace ws;
    Vec xt(d), v(d), residual(d);
    double total = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const FlowSample& item : batch) {
        if (item.x0.size() != d || item.x1.size() != d)
            throw FlowError("flow_matching_loss: sample dimension mismatch");
        for (size_t i = 0; i < d; ++i) xt[i] = (1.0 - item.t) * item.x0[i] + item.t * item.x1[i];
        if (trainable)
            trainable->forward(xt, item.t, item.cond, v, ws);
        else
            field.eval(xt, item.t, item.cond, v);
        double sq = 0.0;
        for (size_t i = 0; i < d; ++i) {
            residual[i] = v[i] - (item.x1[i] - item.x0[i]);
            sq += residual[i] * residual[i];
        }
        total += sq * inv_b;
        if (grad) {
            for (size_t i = 0; i < d; ++i) residual[i] *= 2.0 * inv_b;
            trainable->backward(ws, residual, *grad);
        }
    }
    return total;
}

}  // namespace

double flow_matching_loss(const VelocityField& field, std::span<const FlowSample> batch) {
    return batch_loss(field, batch, nullptr, nullptr);
}

double flow_matching_loss(const MlpField& field, std::span<const FlowSample> batch,
                          std::vector<double>& grad) {
    grad.assign(field.param_count(), 0.0);
    return batch_loss(field, batch, &field, &grad);
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw FlowError("train config: learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw FlowError("train config: momentum in [0,1)");
    if (batch == 0) throw FlowError("train config: batch size must be positive");
}

TrainResult train_flow(MlpField& field, const PairSampler& sampler, const TrainConfig& cfg) {
    cfg.validate();
    TrainResult result;
    if (cfg.steps == 0) return result;

    Rng rng(mix_seed({cfg.seed, 0x666c6f77ull}));  // "flow" stream
    std::vector<FlowSample> batch(cfg.batch);
    std::vector<double> grad;
    std::vector<double> velocity(field.param_count(), 0.0);
    result.curve.reserve(cfg.steps);

    for (size_t step = 0; step < cfg.steps; ++step) {
        for (FlowSample& item : batch) {
            sampler(rng, item.x0, item.x1, item.cond);
            item.t = rng.u01();
        }
        const double loss = flow_matching_loss(field, batch, grad);
        if (!std::isfinite(loss) || !all_finite(grad))
            throw FlowError("train_flow: non-finite loss or gradient at step " +
                            std::to_string(step));
        auto params = field.params_mut();
        for (size_t i = 0; i < params.size(); ++i) {
            velocity[i] = cfg.momentum * velocity[i] - cfg.lr * grad[i];
            params[i] += velocity[i];
        }
        result.curve.push_back({step, loss});
    }
    result.initial_loss = result.curve.front().loss;
    result.final_loss = result.curve.back().loss;
    return result;
}

void write_loss_csv(const std::filesystem::path& path, std::span<const LossRecord> curve) {
    CsvWriter csv(path, {"step", "loss"});
    for (const LossRecord& rec : curve) csv.row({std::to_string(rec.step), fmt_double(rec.loss)});
    csv.flush();
}

size_t GaussMixture::dim() const { return modes.empty() ? 0 : modes.front().center.size(); }

void GaussMixture::validate() const {
    if (modes.empty()) throw FlowError("mixture: no modes");
    double total = 0.0;
    for (const GaussMode& m : modes) {
        if (m.center.size() != dim()) throw FlowError("mixture: inconsistent mode dimensions");
        if (!(m.stddev > 0.0)) throw FlowError("mixture: mode stddev must be positive");
        if (!(m.weight > 0.0)) throw FlowError("mixture: mode weight must be positive");
        total += m.weight;
    }
    if (!(total > 0.0)) throw FlowError("mixture: weights sum to zero");
}

Vec GaussMixture::sample(Rng& rng) const {
    double total = 0.0;
    for (const GaussMode& m : modes) total += m.weight;
    double pick = rng.u01() * total;
    size_t idx = 0;
    for (; idx + 1 < modes.size(); ++idx) {
        pick -= modes[idx].weight;
        if (pick < 0.0) break;
    }
    const GaussMode& mode = modes[idx];
    Vec out(mode.center.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = mode.center[i] + mode.stddev * rng.gaussian();
    return out;
}

PairSampler mixture_pair_sampler(GaussMixture mixture, Vec cond) {
    mixture.validate();
    const size_t d = mixture.dim();
    return [mixture = std::move(mixture), cond = std::move(cond), d](Rng& rng, Vec& x0, Vec& x1,
                                                                     Vec& c) {
        x0.resize(d);
        for (double& v : x0) v = rng.gaussian();
        x1 = mixture.sample(rng);
        c = cond;
    };
}

std::vector<Vec> sample_terminals(const VelocityField& field, size_t n, size_t steps,
                                  const Condition& cond, uint64_t seed,
                                  const NoiseSchedule* schedule, unsigned threads) {
    std::vector<Vec> out(n);
    parallel_for(n, threads, [&](size_t i) {
        Rng rng(mix_seed({seed, 0x7465726dull, i}));  // "term" stream
        Vec x0(field.dim());
        for (double& v : x0) v = rng.gaussian();
        if (schedule) {
            out[i] = sde_sample(field, std::move(x0), cond, steps, *schedule, rng).terminal();
        } else {
            out[i] = ode_sample(field, std::move(x0), cond, steps).terminal();
        }
    });
    return out;
}

double nearest_mode_fraction(std::span<const Vec> points, std::span<const Vec> centers) {
    if (points.empty() || centers.empty())
        throw FlowError("nearest_mode_fraction: empty input");
    size_t hits = 0;
    for (const Vec& p : points) {
        size_t best = 0;
        double best_d = kern::sq_dist(p, centers[0]);
        for (size_t c = 1; c < centers.size(); ++c) {
            const double d = kern::sq_dist(p, centers[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        if (best == 0) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(points.size());
}

}  // namespace prefflow::flow
