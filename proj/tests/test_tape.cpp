#include "doctest.h"

#include <cmath>
#include <functional>

#include "lact/nn/tape.hpp"
#include "test_util.hpp"

using namespace lact;
using namespace lact::nn;
using lact::test::random_image;
using lact::test::random_sinogram;

namespace {

Tensor random_tensor(int c, int h, int w, uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    Tensor t(c, h, w);
    for (double& x : t.v) x = rng.uniform(lo, hi);
    return t;
}

// central-difference check of d(loss)/d(input) against the backward pass
void check_gradient(const std::function<NodeId(Tape&, NodeId)>& build, Tensor x0,
                    double tol = 1e-4, int max_coords = 48) {
    Tape t;
    NodeId x = t.input(x0);
    NodeId loss = build(t, x);
    REQUIRE(t.val(loss).size() == 1);
    t.backward(loss);
    Tensor analytic = t.grad(x);
    REQUIRE(analytic.v.size() == x0.v.size());

    double h = 1e-6;
    size_t n = x0.v.size();
    size_t stride = std::max<size_t>(1, n / max_coords);
    for (size_t i = 0; i < n; i += stride) {
        Tensor xp = x0, xm = x0;
        xp.v[i] += h;
        xm.v[i] -= h;
        Tape tp, tm;
        double fp = tp.val(build(tp, tp.input(xp))).v[0];
        double fm = tm.val(build(tm, tm.input(xm))).v[0];
        double fd = (fp - fm) / (2.0 * h);
        double scale = std::max({1.0, std::fabs(fd), std::fabs(analytic.v[i])});
        CHECK(std::fabs(fd - analytic.v[i]) <= tol * scale);
    }
}

}  // namespace

TEST_CASE("quadratic loss gradient is the input itself") {
    Tensor x0 = random_tensor(2, 5, 7, 1);
    Tape t;
    NodeId x = t.input(x0);
    NodeId loss = t.scale(t.dot(x, x), 0.5);
    t.backward(loss);
    for (size_t i = 0; i < x0.v.size(); ++i)
        CHECK(t.grad(x).v[i] == doctest::Approx(x0.v[i]).epsilon(1e-12));
}

TEST_CASE("elementwise and scalar ops pass finite-difference checks") {
    Tensor a0 = random_tensor(2, 4, 5, 11, 0.5, 2.0);
    Tensor b0 = random_tensor(2, 4, 5, 12, 0.5, 2.0);

    check_gradient(
        [&](Tape& t, NodeId x) {
            NodeId b = t.constant(b0);
            return t.dot(t.add(x, b), t.sub(x, b));
        },
        a0);
    check_gradient(
        [&](Tape& t, NodeId x) {
            NodeId b = t.constant(b0);
            return t.sum_abs(t.mul(x, b));
        },
        a0);
    check_gradient(
        [&](Tape& t, NodeId x) {
            NodeId b = t.constant(b0);
            return t.mean(t.div(x, b));
        },
        a0);
    check_gradient([&](Tape& t, NodeId x) { return t.scale(t.mean(t.relu(x)), 3.0); },
                   random_tensor(1, 6, 6, 13));
    check_gradient(
        [&](Tape& t, NodeId x) {
            NodeId s = t.mean(x);
            NodeId y = t.constant(b0);
            return t.dot(t.axpy(s, t.constant(a0), y), t.constant(b0));
        },
        a0);
    check_gradient([&](Tape& t, NodeId x) { return t.sqrt_s(t.dot(x, x)); }, a0);
    check_gradient([&](Tape& t, NodeId x) { return t.powc(t.mean(x), 0.37); }, a0);
    check_gradient([&](Tape& t, NodeId x) { return t.softshrink(t.mean(x), {0.0}); }, a0);
}

TEST_CASE("structural ops pass finite-difference checks") {
    Tensor x0 = random_tensor(2, 6, 6, 21);
    Tensor w0 = random_tensor(2, 6, 6, 22, 0.1, 1.0);

    check_gradient(
        [&](Tape& t, NodeId x) { return t.sum_abs(t.concat_ch(x, t.constant(w0))); }, x0);
    check_gradient(
        [&](Tape& t, NodeId x) { return t.sum_abs(t.concat_rows(t.constant(w0), x)); }, x0);
    check_gradient([&](Tape& t, NodeId x) { return t.sum_abs(t.slice_rows(x, 1, 4)); }, x0);
    check_gradient([&](Tape& t, NodeId x) { return t.mean(t.avgpool2(x)); }, x0);
    check_gradient([&](Tape& t, NodeId x) { return t.sum_abs(t.upsample2(x)); }, x0);
    check_gradient([&](Tape& t, NodeId x) { return t.weighted_sum_abs(x, w0); }, x0);
    check_gradient([&](Tape& t, NodeId x) { return t.mean(t.chan_scale(x, {0.5, -1.5})); }, x0);
    check_gradient(
        [&](Tape& t, NodeId x) {
            return t.mean(t.row_scale(x, {1.0, 0.0, 2.0, -1.0, 0.5, 3.0}));
        },
        x0);
    check_gradient(
        [&](Tape& t, NodeId x) {
            std::vector<double> taps = {0.25, 0.5, 0.25};
            return t.sum_abs(t.gauss_blur(x, taps));
        },
        x0);
    check_gradient([&](Tape& t, NodeId x) { return t.mean(t.softshrink(x, {0.3, -1.0})); }, x0,
                   1e-4);
}

TEST_CASE("conv2d forward examples") {
    // single pixel, all-ones 3x3 kernel, zero padding: only the center overlaps
    Tensor x(1, 1, 1, 1.0);
    Tensor w(1, 3, 3, 1.0);
    Tensor b(1, 1, 1, 0.0);
    Tensor y = conv2d_forward(x, w, b);
    CHECK(y.v[0] == 1.0);

    // zero kernel gives zero output and bias gradient equals summed upstream
    Tensor x2 = random_tensor(2, 5, 5, 31);
    Tensor w2(3, 2 * 3, 3, 0.0);
    Tensor b2(3, 1, 1, 0.0);
    Tensor y2 = conv2d_forward(x2, w2, b2);
    for (double v : y2.v) CHECK(v == 0.0);
    Tensor gout = random_tensor(3, 5, 5, 32);
    Tensor gx(2, 5, 5, 0.0), gw(3, 6, 3, 0.0), gb(3, 1, 1, 0.0);
    conv2d_backward(x2, w2, gout, gx, gw, gb);
    for (int co = 0; co < 3; ++co) {
        double sum = 0.0;
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 5; ++c) sum += gout.at(co, r, c);
        CHECK(gb.v[co] == doctest::Approx(sum).epsilon(1e-12));
    }
    for (double v : gx.v) CHECK(v == 0.0);  // zero weights propagate nothing
}

TEST_CASE("conv2d gradients match finite differences") {
    Tensor x0 = random_tensor(2, 5, 6, 41);
    Tensor w0 = random_tensor(3, 2 * 3, 3, 42, -0.5, 0.5);
    Tensor b0 = random_tensor(3, 1, 1, 43, -0.1, 0.1);

    check_gradient(
        [&](Tape& t, NodeId x) {
            return t.sum_abs(t.conv2d(x, t.constant(w0), t.constant(b0)));
        },
        x0);
    check_gradient(
        [&](Tape& t, NodeId w) {
            return t.sum_abs(t.conv2d(t.constant(x0), w, t.constant(b0)));
        },
        w0);
    check_gradient(
        [&](Tape& t, NodeId b) {
            return t.sum_abs(t.conv2d(t.constant(x0), t.constant(w0), b));
        },
        b0);
}

TEST_CASE("fixed linear operator nodes differentiate through their adjoints") {
    ScanGeometry g = make_scan_geometry(BeamMode::fan, 0, 8, 12, 16, 16);
    ScanGeometry g_ext = extend_geometry(g, 2, 2);
    AngleSelector sel = AngleSelector::contiguous(2, 8);
    FilterSpec f{};
    FrameTransform ft{};

    Tensor img0 = random_tensor(1, 16, 16, 51);
    Tensor sino0 = random_tensor(1, 8, 12, 52);
    Tensor ext0 = random_tensor(1, 12, 12, 53);

    check_gradient([&](Tape& t, NodeId x) { return t.sum_abs(t.project(x, g)); }, img0, 1e-4);
    check_gradient([&](Tape& t, NodeId y) { return t.sum_abs(t.backproject(y, g)); }, sino0,
                   1e-4);
    check_gradient([&](Tape& t, NodeId y) { return t.sum_abs(t.ril(y, g, f)); }, sino0, 1e-3);
    check_gradient(
        [&](Tape& t, NodeId y) { return t.sum_abs(t.embed_rows(y, sel, g_ext)); }, sino0, 1e-4);
    check_gradient([&](Tape& t, NodeId x) { return t.sum_abs(t.decompose(x, ft)); }, img0, 1e-4);
    check_gradient(
        [&](Tape& t, NodeId x) {
            return t.sum_abs(t.reconstruct(t.decompose(x, ft), ft));
        },
        img0, 1e-4);
    (void)ext0;
}

TEST_CASE("ril node is linear and zero maps to zero") {
    ScanGeometry g = make_scan_geometry(BeamMode::parallel, 0, 10, 14, 12, 12);
    FilterSpec f{};
    Tape t;
    Tensor y0 = random_tensor(1, 10, 14, 61);
    NodeId a = t.ril(t.constant(y0), g, f);
    Tensor y1 = y0;
    for (double& v : y1.v) v *= -2.5;
    NodeId b = t.ril(t.constant(y1), g, f);
    double scale = 0.0;
    for (double v : t.val(a).v) scale = std::max(scale, std::fabs(v));
    for (size_t i = 0; i < t.val(a).v.size(); ++i)
        CHECK(std::fabs(t.val(b).v[i] + 2.5 * t.val(a).v[i]) <= 1e-12 * scale);

    Tape t2;
    NodeId yin = t2.input(Tensor(1, 10, 14, 0.0));
    NodeId z = t2.ril(yin, g, f);
    for (double v : t2.val(z).v) CHECK(v == 0.0);
    t2.backward(t2.sum_abs(z));
    // |0| has zero subgradient, so nothing flows back
    for (double v : t2.grad(yin).v) CHECK(v == 0.0);
}

TEST_CASE("shared parameters accumulate gradients across uses") {
    ParamStore store;
    store.add("p", Tensor(1, 2, 2, 0.5));
    Tape t(&store);
    NodeId p = t.param("p");
    Tensor c1 = random_tensor(1, 2, 2, 71);
    Tensor c2 = random_tensor(1, 2, 2, 72);
    // two uses of the same parameter node
    NodeId loss = t.add(t.dot(p, t.constant(c1)), t.dot(p, t.constant(c2)));
    store.zero_grads();
    t.backward(loss);
    const Tensor& g = store.at("p").grad;
    for (size_t i = 0; i < g.v.size(); ++i)
        CHECK(g.v[i] == doctest::Approx(c1.v[i] + c2.v[i]).epsilon(1e-12));
}

TEST_CASE("tape rejects invalid reductions and mismatched shapes") {
    Tape t;
    NodeId a = t.input(random_tensor(1, 3, 3, 81));
    NodeId b = t.input(random_tensor(1, 2, 3, 82));
    CHECK_THROWS_AS(t.add(a, b), dimension_error);
    CHECK_THROWS_AS(t.backward(a), dimension_error);  // loss must be scalar
    NodeId c = t.constant(Tensor::scalar(2.0));
    CHECK_THROWS_AS(t.backward(c), parameter_error);  // nothing tracked
}
