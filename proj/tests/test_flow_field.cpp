#include <doctest.h>

#include <cmath>
#include <vector>

#include "prefflow/common/rng.hpp"
#include "prefflow/flow/field.hpp"
#include "prefflow/flow/train.hpp"
#include "support/oracles.hpp"

using namespace prefflow;
using namespace prefflow::flow;

namespace {

// Field that always evaluates to a fixed vector, for the perfect-predictor
// and zero-field loss examples.
struct ConstField final : VelocityField {
    Vec value;
    explicit ConstField(Vec v) : value(std::move(v)) {}
    size_t dim() const override { return value.size(); }
    size_t cond_dim() const override { return 0; }
    void eval(std::span<const double>, double, std::span<const double>,
              std::span<double> out) const override {
        for (size_t i = 0; i < value.size(); ++i) out[i] = value[i];
    }
};

}  // namespace

TEST_CASE("interpolate endpoints and midpoint") {
    const Vec x0{0.0, 0.0}, x1{2.0, 4.0};
    CHECK(interpolate(x0, x1, 0.0) == Vec{0.0, 0.0});
    CHECK(interpolate(x0, x1, 1.0) == Vec{2.0, 4.0});
    CHECK(interpolate(x0, x1, 0.5) == Vec{1.0, 2.0});
}

TEST_CASE("interpolate rejects bad input") {
    CHECK_THROWS_AS(interpolate({1.0}, {1.0, 2.0}, 0.5), FlowError);
    CHECK_THROWS_AS(interpolate({1.0}, {2.0}, 1.5), FlowError);
    CHECK_THROWS_AS(interpolate({1.0}, {2.0}, -0.1), FlowError);
}

TEST_CASE("interpolate is affine in t and reproducible") {
    Rng rng(77);
    for (int rep = 0; rep < 200; ++rep) {
        Vec x0(3), x1(3);
        for (auto* v : {&x0, &x1})
            for (double& c : *v) c = rng.uniform(-5, 5);
        const double t = rng.u01();
        const Vec a = interpolate(x0, x1, t);
        const Vec b = interpolate(x0, x1, t);
        CHECK(a == b);  // same inputs, same bits
        for (size_t i = 0; i < 3; ++i) {
            const double affine = x0[i] + t * (x1[i] - x0[i]);
            CHECK(a[i] == doctest::Approx(affine).epsilon(1e-14));
        }
    }
}

TEST_CASE("analytic gaussian field hand values") {
    AnalyticGaussianField unit(1.0, 2);
    const Vec v1 = unit.eval_vec({1.0, 0.0}, 0.5);
    CHECK(v1[0] == doctest::Approx(0.0));
    CHECK(v1[1] == doctest::Approx(0.0));

    AnalyticGaussianField wide(2.0, 2);
    // (0.5*4 - 0.5) / (0.25 + 1.0) = 1.2
    const Vec v2 = wide.eval_vec({1.0, 0.0}, 0.5);
    CHECK(v2[0] == doctest::Approx(1.2));
    CHECK(v2[1] == doctest::Approx(0.0));

    // t=0: (0 - 1)/1 * x = -x
    const Vec v3 = unit.eval_vec({3.0, 3.0}, 0.0);
    CHECK(v3[0] == doctest::Approx(-3.0));
    CHECK(v3[1] == doctest::Approx(-3.0));

    CHECK_THROWS_AS(AnalyticGaussianField(0.0, 2), FlowError);
}

TEST_CASE("noise schedules") {
    NoiseSchedule constant{NoiseSchedule::Kind::constant, 0.3};
    CHECK(constant.sigma(0.0) == 0.3);
    CHECK(constant.sigma(0.9) == 0.3);

    NoiseSchedule scaled{NoiseSchedule::Kind::scaled, 0.5};
    CHECK(scaled.sigma(0.0) == 0.0);
    CHECK(scaled.sigma(0.5) == doctest::Approx(0.5));
    CHECK(scaled.sigma(0.8) == doctest::Approx(0.5 * std::sqrt(4.0)));
    CHECK_THROWS_AS(scaled.sigma(1.0), FlowError);
}

TEST_CASE("flow matching loss: perfect predictor gives zero") {
    const Vec x0{0.0, 0.0}, x1{2.0, 4.0};
    ConstField perfect({2.0, 4.0});  // always x1 - x0
    std::vector<FlowSample> batch{{x0, x1, 0.3, {}}};
    CHECK(flow_matching_loss(perfect, batch) == doctest::Approx(0.0));
}

TEST_CASE("flow matching loss: zero field on unit pair gives one") {
    ConstField zero({0.0, 0.0});
    std::vector<FlowSample> batch{{{0.0, 0.0}, {1.0, 0.0}, 0.7, {}}};
    CHECK(flow_matching_loss(zero, batch) == doctest::Approx(1.0));
}

TEST_CASE("flow matching loss rejects empty batches") {
    ConstField zero({0.0, 0.0});
    CHECK_THROWS_AS(flow_matching_loss(zero, {}), FlowError);
}

TEST_CASE("flow matching loss is nonnegative") {
    Rng rng(11);
    MlpField field({.dim = 2, .cond_dim = 0, .hidden = {4}});
    field.init_params(rng);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<FlowSample> batch(3);
        for (auto& s : batch) {
            s.x0 = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
            s.x1 = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
            s.t = rng.u01();
        }
        CHECK(flow_matching_loss(field, batch) >= 0.0);
    }
}

TEST_CASE("flow matching gradient matches central finite differences") {
    Rng rng(13);
    // Small conditional network so every parameter path is exercised.
    MlpField field({.dim = 2, .cond_dim = 1, .hidden = {3}});
    field.init_params(rng);

    std::vector<FlowSample> batch(4);
    for (auto& s : batch) {
        s.x0 = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        s.x1 = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        s.t = rng.u01();
        s.cond = {rng.uniform(-1, 1)};
    }

    std::vector<double> analytic;
    flow_matching_loss(field, batch, analytic);

    MlpField probe = field;
    const auto fd = oracles::finite_diff_grad(
        [&](std::span<const double> theta) {
            probe.set_params(theta);
            return flow_matching_loss(probe, batch);
        },
        {field.params().begin(), field.params().end()});

    CHECK(oracles::rel_error(analytic, fd) < 1e-4);
}

TEST_CASE("mlp eval is deterministic and cond-checked") {
    Rng rng(3);
    MlpField field({.dim = 2, .cond_dim = 2, .hidden = {8, 8}});
    field.init_params(rng);
    const Vec x{0.4, -0.2}, c{1.0, -1.0};
    CHECK(field.eval_vec(x, 0.3, c) == field.eval_vec(x, 0.3, c));
    CHECK_THROWS_AS(field.eval_vec(x, 0.3, {}), FlowError);
    CHECK_THROWS_AS(field.eval_vec({0.4}, 0.3, c), FlowError);
}

TEST_CASE("mlp parameter count follows the architecture") {
    // in = 2 + 3 time features, hidden {1}: 5*1+1 + 1*2+2 = 10
    MlpArch tiny{.dim = 2, .cond_dim = 0, .hidden = {1}};
    CHECK(tiny.param_count() == 10);
    MlpArch base{.dim = 2, .cond_dim = 0, .hidden = {64, 64}};
    CHECK(base.param_count() == (5 + 1) * 64 + (64 + 1) * 64 + (64 + 1) * 2);
}
