#include "prefflow/flow/field.hpp"

#include <cmath>

#include "prefflow/kern/kernels.hpp"

namespace prefflow::flow {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

Vec interpolate(const Vec& x0, const Vec& x1, double t) {
    if (x0.size() != x1.size())
        throw FlowError("interpolate: dimension mismatch (" + std::to_string(x0.size()) + " vs " +
                        std::to_string(x1.size()) + ")");
    if (!(t >= 0.0 && t <= 1.0))
        throw FlowError("interpolate: t=" + fmt_double(t) + " outside [0,1]");
    Vec out(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) out[i] = (1.0 - t) * x0[i] + t * x1[i];
    return out;
}

double NoiseSchedule::sigma(double t) const {
    if (level < 0.0) throw FlowError("noise schedule: negative level");
    switch (kind) {
        case Kind::constant:
            return level;
        case Kind::scaled: {
            if (!(t >= 0.0 && t < 1.0))
                throw FlowError("scaled noise schedule undefined at t=" + fmt_double(t));
            return level * std::sqrt(t / (1.0 - t));
        }
    }
    throw FlowError("noise schedule: bad kind");
}

AnalyticGaussianField::AnalyticGaussianField(double a, size_t dim) : a_(a), dim_(dim) {
    if (!(a > 0.0)) throw FlowError("analytic gaussian field requires a > 0");
    if (dim == 0) throw FlowError("analytic gaussian field requires dim >= 1");
}

double AnalyticGaussianField::coefficient(double t) const {
    const double a2 = a_ * a_;
    const double one_t = 1.0 - t;
    return (t * a2 - one_t) / (one_t * one_t + t * t * a2);
}

void AnalyticGaussianField::eval(std::span<const double> x, double t, std::span<const double>,
                                 std::span<double> out) const {
    if (x.size() != dim_ || out.size() != dim_)
        throw FlowError("analytic gaussian field: dimension mismatch");
    const double c = coefficient(t);
    for (size_t i = 0; i < dim_; ++i) out[i] = c * x[i];
}

std::vector<size_t> MlpArch::layer_sizes() const {
    std::vector<size_t> sizes;
    sizes.push_back(input_size());
    for (size_t h : hidden) sizes.push_back(h);
    sizes.push_back(dim);
    return sizes;
}

size_t MlpArch::param_count() const {
    const auto sizes = layer_sizes();
    size_t count = 0;
    for (size_t l = 0; l + 1 < sizes.size(); ++l) count += sizes[l + 1] * (sizes[l] + 1);
    return count;
}

MlpField::MlpField(MlpArch arch) : arch_(std::move(arch)), sizes_(arch_.layer_sizes()) {
    if (arch_.dim == 0) throw FlowError("mlp field requires dim >= 1");
    for (size_t h : arch_.hidden)
        if (h == 0) throw FlowError("mlp field: zero-width hidden layer");
    size_t offset = 0;
    for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
        w_off_.push_back(offset);
        offset += sizes_[l + 1] * sizes_[l];
        b_off_.push_back(offset);
        offset += sizes_[l + 1];
    }
    params_.assign(offset, 0.0);
}

void MlpField::set_params(std::span<const double> p) {
    if (p.size() != params_.size())
        throw FlowError("set_params: expected " + std::to_string(params_.size()) +
                        " parameters, got " + std::to_string(p.size()));
    params_.assign(p.begin(), p.end());
}

void MlpField::init_params(Rng& rng) {
    for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
        double* w = params_.data() + w_off_[l];
        for (size_t i = 0; i < sizes_[l + 1] * sizes_[l]; ++i) w[i] = rng.uniform(-scale, scale);
        double* b = params_.data() + b_off_[l];
        for (size_t i = 0; i < sizes_[l + 1]; ++i) b[i] = 0.0;
    }
}

void MlpField::fill_features(std::span<const double> x, double t, std::span<const double> cond,
                             Vec& input) const {
    if (x.size() != arch_.dim) throw FlowError("mlp field: point dimension mismatch");
    if (cond.size() != arch_.cond_dim)
        throw FlowError("mlp field: condition dimension mismatch (expected " +
                        std::to_string(arch_.cond_dim) + ", got " + std::to_string(cond.size()) +
                        ")");
    input.resize(arch_.input_size());
    size_t k = 0;
    for (double v : x) input[k++] = v;
    input[k++] = t;
    input[k++] = std::sin(kTwoPi * t);
    input[k++] = std::cos(kTwoPi * t);
    for (double v : cond) input[k++] = v;
}

void MlpField::forward(std::span<const double> x, double t, std::span<const double> cond,
                       std::span<double> out, Workspace& ws) const {
    fill_features(x, t, cond, ws.input);
    const size_t layers = sizes_.size() - 1;
    ws.pre.resize(layers);
    ws.act.resize(layers);
    const double* src = ws.input.data();
    size_t src_n = sizes_[0];
    const auto& ops = kern::active();
    for (size_t l = 0; l < layers; ++l) {
        const size_t rows = sizes_[l + 1];
        ws.pre[l].resize(rows);
        ops.matvec(params_.data() + w_off_[l], rows, src_n, src, params_.data() + b_off_[l],
                   ws.pre[l].data());
        if (l + 1 < layers) {
            ws.act[l].resize(rows);
            for (size_t i = 0; i < rows; ++i) ws.act[l][i] = std::tanh(ws.pre[l][i]);
            src = ws.act[l].data();
        } else {
            src = ws.pre[l].data();
        }
        src_n = rows;
    }
    if (out.size() != arch_.dim) throw FlowError("mlp field: output span size mismatch");
    const Vec& last = ws.pre[layers - 1];
    for (size_t i = 0; i < arch_.dim; ++i) out[i] = last[i];
}

void MlpField::eval(std::span<const double> x, double t, std::span<const double> cond,
                    std::span<double> out) const {
    thread_local Workspace ws;
    forward(x, t, cond, out, ws);
}

void MlpField::backward(Workspace& ws, std::span<const double> grad_out,
                        std::span<double> grad_acc) const {
    if (grad_out.size() != arch_.dim) throw FlowError("backward: grad_out size mismatch");
    if (grad_acc.size() != params_.size()) throw FlowError("backward: grad_acc size mismatch");
    const size_t layers = sizes_.size() - 1;
    auto& scratch = ws.grad;
    scratch.resize(layers);
    scratch[layers - 1].assign(grad_out.begin(), grad_out.end());
    const auto& ops = kern::active();
    for (size_t l = layers; l-- > 0;) {
        const size_t rows = sizes_[l + 1];
        const size_t cols = sizes_[l];
        const double* below = l == 0 ? ws.input.data() : ws.act[l - 1].data();
        const Vec& g = scratch[l];
        ops.ger_acc(grad_acc.data() + w_off_[l], rows, cols, g.data(), below);
        double* gb = grad_acc.data() + b_off_[l];
        for (size_t i = 0; i < rows; ++i) gb[i] += g[i];
        if (l > 0) {
            Vec& gprev = scratch[l - 1];
            gprev.assign(cols, 0.0);
            ops.matvec_t_acc(params_.data() + w_off_[l], rows, cols, g.data(), gprev.data());
            const Vec& a = ws.act[l - 1];
            for (size_t i = 0; i < cols; ++i) gprev[i] *= 1.0 - a[i] * a[i];
        }
    }
}

}  // namespace prefflow::flow
