#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prefflow/common/rng.hpp"
#include "prefflow/common/util.hpp"

namespace prefflow::flow {

using Vec = std::vector<double>;

struct FlowError : PrefflowError {
    using PrefflowError::PrefflowError;
};

// Prompt/condition token. The embedding is passed to conditional fields;
// fields with cond_dim == 0 ignore it.
struct Condition {
    std::string id;
    Vec embedding;
};

// (1-t)*x0 + t*x1. Throws on dimension mismatch or t outside [0,1].
Vec interpolate(const Vec& x0, const Vec& x1, double t);

// Velocity magnitude of the sampling noise, as a function of flow time.
//   constant: sigma(t) = level
//   scaled:   sigma(t) = level * sqrt(t / (1-t)), finite on [0, 1)
struct NoiseSchedule {
    enum class Kind { constant, scaled };
    Kind kind = Kind::constant;
    double level = 0.3;

    double sigma(double t) const;
    bool is_zero() const { return level == 0.0; }
};

class VelocityField {
  public:
    virtual ~VelocityField() = default;
    virtual size_t dim() const = 0;
    virtual size_t cond_dim() const = 0;
    // out = v(x, t, cond); deterministic and safe to call concurrently.
    virtual void eval(std::span<const double> x, double t, std::span<const double> cond,
                      std::span<double> out) const = 0;

    Vec eval_vec(const Vec& x, double t, const Vec& cond = {}) const {
        Vec out(dim());
        eval(x, t, cond, out);
        return out;
    }
};

// Closed-form marginal velocity for x0 ~ N(0,I), x1 ~ N(0, a^2 I):
//   v(x,t) = (t*a^2 - (1-t)) / ((1-t)^2 + t^2*a^2) * x
// Used as a testing oracle; carries no parameters.
class AnalyticGaussianField final : public VelocityField {
  public:
    AnalyticGaussianField(double a, size_t dim);

    size_t dim() const override { return dim_; }
    size_t cond_dim() const override { return 0; }
    void eval(std::span<const double> x, double t, std::span<const double> cond,
              std::span<double> out) const override;

    double coefficient(double t) const;

  private:
    double a_;
    size_t dim_;
};

// Fully-connected architecture: input is [x, t, sin(2*pi*t), cos(2*pi*t),
// cond], tanh hidden layers, linear output of size dim.
struct MlpArch {
    size_t dim = 2;
    size_t cond_dim = 0;
    std::vector<size_t> hidden{64, 64};

    size_t input_size() const { return dim + 3 + cond_dim; }
    std::vector<size_t> layer_sizes() const;
    size_t param_count() const;

    bool operator==(const MlpArch&) const = default;
};

class MlpField final : public VelocityField {
  public:
    explicit MlpField(MlpArch arch);

    size_t dim() const override { return arch_.dim; }
    size_t cond_dim() const override { return arch_.cond_dim; }
    const MlpArch& arch() const { return arch_; }

    std::span<const double> params() const { return params_; }
    std::span<double> params_mut() { return params_; }
    void set_params(std::span<const double> p);
    size_t param_count() const { return params_.size(); }

    // Uniform(-s, s) weights with s = 1/sqrt(fan_in), zero biases.
    void init_params(Rng& rng);

    void eval(std::span<const double> x, double t, std::span<const double> cond,
              std::span<double> out) const override;

    // Caches the activations needed by backward(). One workspace per thread;
    // reusing it avoids per-call allocation in the samplers and trainers.
    struct Workspace {
        Vec input;
        std::vector<Vec> pre;   // z per layer
        std::vector<Vec> act;   // tanh(z) per hidden layer
        std::vector<Vec> grad;  // backward scratch per layer
    };

    void forward(std::span<const double> x, double t, std::span<const double> cond,
                 std::span<double> out, Workspace& ws) const;

    // Accumulates d(loss)/d(params) into grad_acc given d(loss)/d(out).
    // Must be called with the workspace of the matching forward().
    void backward(Workspace& ws, std::span<const double> grad_out,
                  std::span<double> grad_acc) const;

  private:
    void fill_features(std::span<const double> x, double t, std::span<const double> cond,
                       Vec& input) const;

    MlpArch arch_;
    std::vector<size_t> sizes_;    // layer widths including input and output
    std::vector<size_t> w_off_;    // offset of each layer's weight block
    std::vector<size_t> b_off_;    // offset of each layer's bias block
    std::vector<double> params_;
};

}  // namespace prefflow::flow
