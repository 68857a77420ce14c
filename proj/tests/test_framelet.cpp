#include "doctest.h"

#include <cmath>

#include "lact/framelet.hpp"
#include "test_util.hpp"

using namespace lact;
using namespace lact::test;

TEST_CASE("constant images have exactly zero highpass coefficients") {
    FrameTransform t;
    Image u(17, 23, 3.25);
    FrameCoeffs z = frame_decompose(u, t);
    for (int i = 0; i < z.highpass_count(); ++i)
        for (double v : z.highpass(i)) CHECK(std::fabs(v) <= 1e-12);
}

TEST_CASE("tight frame: Parseval and perfect reconstruction") {
    for (int levels : {1, 2, 3}) {
        FrameTransform t{levels};
        int sizes[][2] = {{7, 7}, {8, 8}, {16, 9}, {17, 32}, {31, 30}};
        for (auto [h, w] : sizes) {
            Image u = random_image(h, w, 1000 + levels * 10 + h);
            FrameCoeffs z = frame_decompose(u, t);
            double norm_u = nrm2(u.data);
            double norm_z = 0.0;
            for (const auto& ch : z.channels) norm_z += dot(ch, ch);
            norm_z = std::sqrt(norm_z);
            CHECK(std::fabs(norm_z - norm_u) <= 1e-10 * std::max(1.0, norm_u));
            Image r = frame_reconstruct(z, t);
            CHECK(max_abs_diff(r.data, u.data) < 1e-10);
        }
    }
}

TEST_CASE("tight frame holds on 50 seeded images") {
    FrameTransform t;
    for (int trial = 0; trial < 50; ++trial) {
        int h = 5 + (trial * 7) % 28;
        int w = 5 + (trial * 11) % 28;
        Image u = random_image(h, w, 4000 + trial);
        Image r = frame_reconstruct(frame_decompose(u, t), t);
        CHECK(max_abs_diff(r.data, u.data) < 1e-10);
    }
}

TEST_CASE("decompose/reconstruct are exact adjoints") {
    FrameTransform t{2};
    Image u = random_image(13, 19, 31);
    FrameCoeffs z = frame_decompose(random_image(13, 19, 32), t);
    // fill z with independent random data of the right shape
    Rng rng(33);
    for (auto& ch : z.channels)
        for (double& v : ch) v = rng.uniform(-1.0, 1.0);
    FrameCoeffs wu = frame_decompose(u, t);
    double lhs = 0.0;
    for (size_t c = 0; c < wu.channels.size(); ++c) lhs += dot(wu.channels[c], z.channels[c]);
    double rhs = dot(u.data, frame_reconstruct(z, t).data);
    CHECK(std::fabs(lhs - rhs) <= 1e-12 * std::max(1.0, std::fabs(lhs)));
}

TEST_CASE("impulse responses equal the flipped filter taps") {
    FrameTransform t;
    int n = 9, c0 = 4;
    Image u(n, n, 0.0);
    u.at(c0, c0) = 1.0;
    FrameCoeffs z = frame_decompose(u, t);
    const double s = std::sqrt(2.0) / 4.0;
    const double taps[3][3] = {{0.25, 0.5, 0.25}, {s, 0.0, -s}, {-0.25, 0.5, -0.25}};
    int idx = 0;
    for (int fr = 0; fr < 3; ++fr)
        for (int fc = 0; fc < 3; ++fc) {
            if (fr == 0 && fc == 0) continue;
            const auto& ch = z.highpass(idx++);
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    // correlation: response at center-offset equals tap at +offset, flipped
                    double expect = taps[fr][1 - dr] * taps[fc][1 - dc];
                    CHECK(ch[(c0 + dr) * n + (c0 + dc)] == doctest::Approx(expect).epsilon(1e-12));
                }
        }
}

TEST_CASE("zero coefficients reconstruct to the zero image") {
    FrameTransform t;
    FrameCoeffs z = frame_decompose(Image(8, 8, 0.0), t);
    Image u = frame_reconstruct(z, t);
    for (double v : u.data) CHECK(v == 0.0);
}

TEST_CASE("soft threshold formula cases") {
    CHECK(soft_threshold_scalar(3.0, 1.0) == 2.0);
    CHECK(soft_threshold_scalar(-1.0, 2.0) == 0.0);
    for (double x : {-2.5, -0.1, 0.0, 0.4, 7.0}) CHECK(soft_threshold_scalar(x, 0.0) == x);
}

TEST_CASE("soft threshold acts on highpass channels only and validates input") {
    FrameTransform t;
    Image u = random_image(12, 12, 77);
    FrameCoeffs z = frame_decompose(u, t);
    FrameCoeffs zt = soft_threshold(z, {0.25});
    CHECK(max_abs_diff(zt.lowpass(), z.lowpass()) == 0.0);
    for (int i = 0; i < z.highpass_count(); ++i)
        for (size_t j = 0; j < z.highpass(i).size(); ++j)
            CHECK(zt.highpass(i)[j] == soft_threshold_scalar(z.highpass(i)[j], 0.25));
    CHECK_THROWS_AS(soft_threshold(z, {-1.0}), parameter_error);
    CHECK_THROWS_AS(soft_threshold(z, {0.1, 0.2}), dimension_error);
}

TEST_CASE("soft threshold is the scalar proximal minimizer (grid search)") {
    double lam = 0.7;
    for (double w : {-2.0, -0.65, 0.0, 0.3, 1.9}) {
        double best = 0.0, best_val = 1e300;
        for (double v = -4.0; v <= 4.0; v += 1e-4) {
            double val = lam * std::fabs(v) + 0.5 * (v - w) * (v - w);
            if (val < best_val) {
                best_val = val;
                best = v;
            }
        }
        CHECK(std::fabs(soft_threshold_scalar(w, lam) - best) <= 1e-4);
    }
}

TEST_CASE("soft threshold is non-expansive") {
    Rng rng(501);
    for (int trial = 0; trial < 200; ++trial) {
        double a = rng.uniform(-3.0, 3.0), b = rng.uniform(-3.0, 3.0);
        double lam = rng.uniform(0.0, 2.0);
        CHECK(std::fabs(soft_threshold_scalar(a, lam) - soft_threshold_scalar(b, lam)) <=
              std::fabs(a - b) + 1e-15);
    }
}
