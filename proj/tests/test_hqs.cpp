#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "lact/hqs.hpp"
#include "test_util.hpp"

using namespace lact;
using namespace lact::test;

namespace {

struct Toy {
    ScanGeometry g_meas, g_ext;
    AngleSelector sel;
    FrameTransform ft;
};

Toy make_toy(int size, int views, int ndet, int extra) {
    Toy t;
    t.g_meas = make_scan_geometry(BeamMode::fan, 0, views, ndet, size, size);
    t.g_ext = extend_geometry(t.g_meas, extra / 2, extra - extra / 2);
    t.sel = AngleSelector::contiguous(extra / 2, views);
    return t;
}

// the documented u-update system operator, rebuilt from public pieces
Image apply_system_public(const Image& x, const Toy& t, const HqsConfig& cfg) {
    PlainBackend bk;
    Image acc = back_project(forward_project(x, t.g_meas), t.g_meas);
    std::vector<double> w(t.ft.total_channels(), 0.0);
    auto gam = cfg.channel_gammas(t.ft.highpass_channels());
    for (int i = 0; i < t.ft.highpass_channels(); ++i) w[1 + i] = gam[i];
    acc = bk.img_add(acc, frame_reconstruct(bk.chan_scale(frame_decompose(x, t.ft), w), t.ft));
    if (cfg.beta2 != 0.0)
        acc = bk.img_add(acc, bk.img_scale(back_project(forward_project(x, t.g_ext), t.g_ext),
                                           2.0 * cfg.beta2));
    return acc;
}

}  // namespace

TEST_CASE("cg solves the identity system in one iteration") {
    Image b = random_image(4, 4, 3);
    CgResult r = cg_solve([](const Image& x) { return x; }, b, Image(4, 4, 0.0), 10, 1e-12);
    CHECK(r.iters == 1);
    CHECK(max_abs_diff(r.x.data, b.data) < 1e-12);
}

TEST_CASE("cg solves a 2x2 system exactly") {
    Image rhs(1, 2);
    rhs.data = {1.0, 2.0};
    auto apply = [](const Image& x) {
        Image y(1, 2);
        y.data = {4.0 * x.data[0] + x.data[1], x.data[0] + 3.0 * x.data[1]};
        return y;
    };
    CgResult r = cg_solve(apply, rhs, Image(1, 2, 0.0), 10, 1e-14);
    CHECK(r.x.data[0] == doctest::Approx(1.0 / 11.0).epsilon(1e-12));
    CHECK(r.x.data[1] == doctest::Approx(7.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("cg reaches the dense solution of an 8-dim SPD system") {
    const int n = 8;
    Eigen::MatrixXd B(n, n);
    Rng rng(42);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = rng.uniform(-1.0, 1.0);
    Eigen::MatrixXd M = B.transpose() * B + Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b(i) = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd ref = M.ldlt().solve(b);

    Image rhs(1, n);
    for (int i = 0; i < n; ++i) rhs.data[i] = b(i);
    auto apply = [&](const Image& x) {
        Image y(1, n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) y.data[i] += M(i, j) * x.data[j];
        return y;
    };
    CgResult r = cg_solve(apply, rhs, Image(1, n, 0.0), n, 0.0);
    CHECK(r.iters <= n);
    for (int i = 0; i < n; ++i) CHECK(r.x.data[i] == doctest::Approx(ref(i)).epsilon(1e-8));
    Image res = apply(r.x);
    CHECK(max_abs_diff(res.data, rhs.data) < 1e-10);
}

TEST_CASE("cg reports divergence on a non-finite system") {
    auto apply = [](const Image& x) {
        Image y = x;
        for (double& v : y.data) v = v * 1e308 * 1e308;
        return y;
    };
    Image b(1, 2, 1.0);
    CHECK_THROWS_AS(cg_solve(apply, b, Image(1, 2, 1.0), 5, 1e-12), divergence_error);
}

TEST_CASE("y_tilde update blends measured rows and copies projected ones") {
    Toy t = make_toy(16, 5, 7, 2);
    Image u = random_image(16, 16, 9);
    Sinogram au_ext = forward_project(u, t.g_ext);

    // hand-set measured data so the blend is easy to read
    Sinogram y = select_views(au_ext, t.sel);
    for (double& v : y.data) v = 2.0;

    Sinogram yt = y_tilde_update(y, u, t.sel, t.g_ext, 1.0, 1.0);
    for (int v = 0; v < t.g_ext.n_views(); ++v)
        for (int d = 0; d < 7; ++d) {
            if (t.sel.is_measured(v, t.g_ext.n_views())) {
                CHECK(yt.at(v, d) ==
                      doctest::Approx(0.5 * (2.0 + au_ext.at(v, d))).epsilon(1e-12));
            } else {
                CHECK(yt.at(v, d) == doctest::Approx(au_ext.at(v, d)).epsilon(1e-12));
            }
        }

    // unmeasured rows ignore beta1 entirely
    Sinogram yt2 = y_tilde_update(y, u, t.sel, t.g_ext, 123.0, 1.0);
    for (int v = 0; v < t.g_ext.n_views(); ++v)
        if (!t.sel.is_measured(v, t.g_ext.n_views()))
            for (int d = 0; d < 7; ++d)
                CHECK(yt2.at(v, d) == doctest::Approx(au_ext.at(v, d)).epsilon(1e-12));

    CHECK_THROWS_AS(y_tilde_update(y, u, t.sel, t.g_ext, 0.0, 0.0), parameter_error);
}

TEST_CASE("y_tilde update matches the dense least-squares oracle") {
    Toy t = make_toy(16, 5, 7, 2);
    double beta1 = 0.8, beta2 = 0.35;
    Image u = random_image(16, 16, 10);
    Sinogram y = random_sinogram(t.g_meas, 11, 0.0, 2.0);
    Sinogram yt = y_tilde_update(y, u, t.sel, t.g_ext, beta1, beta2);

    // assemble beta1 P^T P + beta2 I over all extended entries and solve
    Sinogram au = forward_project(u, t.g_ext);
    Sinogram ey = embed_views(y, t.sel, t.g_ext);
    int n = static_cast<int>(au.data.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs(n);
    int D = t.g_ext.n_detectors;
    for (int i = 0; i < n; ++i) {
        bool meas = t.sel.is_measured(i / D, t.g_ext.n_views());
        A(i, i) = beta2 + (meas ? beta1 : 0.0);
        rhs(i) = beta1 * ey.data[i] + beta2 * au.data[i];
    }
    Eigen::VectorXd ref = A.ldlt().solve(rhs);
    for (int i = 0; i < n; ++i) CHECK(std::fabs(yt.data[i] - ref(i)) < 1e-8);
}

TEST_CASE("u-update system operator is symmetric positive definite") {
    Toy t = make_toy(12, 8, 18, 4);
    HqsConfig cfg;
    cfg.lambda = 1e-2;
    cfg.gamma = {0.7};
    cfg.beta2 = 0.3;
    for (int trial = 0; trial < 5; ++trial) {
        Image a = random_image(12, 12, 600 + trial);
        Image b = random_image(12, 12, 700 + trial);
        Image oa = apply_system_public(a, t, cfg);
        Image ob = apply_system_public(b, t, cfg);
        double lhs = dot(oa.data, b.data);
        double rhs = dot(a.data, ob.data);
        CHECK(std::fabs(lhs - rhs) <= 1e-8 * std::max(std::fabs(lhs), 1.0));
        CHECK(dot(oa.data, a.data) > 0.0);
    }
}

TEST_CASE("u-update matches a dense assembly and solve") {
    Toy t = make_toy(8, 10, 16, 4);
    HqsConfig cfg;
    cfg.lambda = 5e-3;
    cfg.gamma = {0.9};
    cfg.beta2 = 0.25;
    cfg.cg_max_iters = 400;
    cfg.cg_tol = 1e-13;

    Image u_seed = random_image(8, 8, 80);
    FrameCoeffs z = soft_threshold(frame_decompose(u_seed, t.ft), {0.01});
    Sinogram y = forward_project(random_image(8, 8, 81), t.g_meas);
    Sinogram ytld = forward_project(random_image(8, 8, 82), t.g_ext);

    UUpdateResult res = u_update(y, ytld, z, t.g_meas, t.g_ext, t.sel, t.ft, cfg, Image(8, 8, 0.0));

    const int n = 64;
    Eigen::MatrixXd S(n, n);
    for (int j = 0; j < n; ++j) {
        Image e(8, 8, 0.0);
        e.data[j] = 1.0;
        Image col = apply_system_public(e, t, cfg);
        for (int i = 0; i < n; ++i) S(i, j) = col.data[i];
    }
    PlainBackend bk;
    std::vector<double> w(t.ft.total_channels(), 0.0);
    auto gam = cfg.channel_gammas(t.ft.highpass_channels());
    for (int i = 0; i < t.ft.highpass_channels(); ++i) w[1 + i] = gam[i];
    Image rhs_img = back_project(y, t.g_meas);
    rhs_img = bk.img_add(rhs_img, frame_reconstruct(bk.chan_scale(z, w), t.ft));
    rhs_img = bk.img_add(rhs_img,
                         bk.img_scale(back_project(ytld, t.g_ext), 2.0 * cfg.beta2));
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) rhs(i) = rhs_img.data[i];
    Eigen::VectorXd ref = S.ldlt().solve(rhs);

    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
        num += (res.u.data[i] - ref(i)) * (res.u.data[i] - ref(i));
        den += ref(i) * ref(i);
    }
    CHECK(std::sqrt(num / den) < 1e-5);

    // the returned solution reproduces the right-hand side within cg_tol
    Image chk = apply_system_public(res.u, t, cfg);
    CHECK(rel_l2_diff(chk.data, rhs_img.data) < 1e-6);
}

TEST_CASE("u-update with gamma=0 and beta2=0 solves the plain normal equations") {
    Toy t = make_toy(8, 10, 16, 4);
    HqsConfig cfg;
    cfg.lambda = 0.0;
    cfg.gamma = {0.0};
    cfg.beta2 = 0.0;
    cfg.cg_max_iters = 50;
    cfg.cg_tol = 1e-12;
    Sinogram y = forward_project(random_image(8, 8, 90), t.g_meas);
    FrameCoeffs z = frame_decompose(Image(8, 8, 0.0), t.ft);
    Sinogram ytld(t.g_ext, 0.0);
    UUpdateResult a = u_update(y, ytld, z, t.g_meas, t.g_ext, t.sel, t.ft, cfg, Image(8, 8, 0.0));
    CgResult b = cg_solve(
        [&](const Image& x) { return back_project(forward_project(x, t.g_meas), t.g_meas); },
        back_project(y, t.g_meas), Image(8, 8, 0.0), cfg.cg_max_iters, cfg.cg_tol);
    for (size_t i = 0; i < a.u.data.size(); ++i) CHECK(a.u.data[i] == b.x.data[i]);
}

TEST_CASE("z-update cases and oracle") {
    Toy t = make_toy(12, 6, 14, 2);
    HqsConfig cfg;
    cfg.gamma = {2.0};

    SUBCASE("lambda 0 returns the raw coefficients") {
        cfg.lambda = 0.0;
        Image u = random_image(12, 12, 21);
        FrameCoeffs z = z_update(u, t.ft, cfg);
        FrameCoeffs wu = frame_decompose(u, t.ft);
        for (size_t c = 0; c < z.channels.size(); ++c)
            CHECK(max_abs_diff(z.channels[c], wu.channels[c]) == 0.0);
    }
    SUBCASE("constant image thresholds to zero highpass") {
        cfg.lambda = 1e-3;
        FrameCoeffs z = z_update(Image(12, 12, 4.2), t.ft, cfg);
        for (int i = 0; i < z.highpass_count(); ++i)
            for (double v : z.highpass(i)) CHECK(v == 0.0);
    }
    SUBCASE("per-entry scalar minimizer") {
        cfg.lambda = 0.05;
        Image u = random_image(12, 12, 22);
        FrameCoeffs z = z_update(u, t.ft, cfg);
        FrameCoeffs wu = frame_decompose(u, t.ft);
        double thr = cfg.lambda / cfg.gamma[0];
        for (int i = 0; i < z.highpass_count(); ++i)
            for (size_t j = 0; j < z.highpass(i).size(); ++j) {
                double w = wu.highpass(i)[j];
                double best = 0.0, best_val = 1e300;
                for (double v = w - 2.0 * thr; v <= w + 2.0 * thr; v += thr * 1e-3) {
                    double val = cfg.lambda * std::fabs(v) + 0.5 * cfg.gamma[0] * (v - w) * (v - w);
                    if (val < best_val) {
                        best_val = val;
                        best = v;
                    }
                }
                CHECK(std::fabs(z.highpass(i)[j] - best) <= 2e-4);
            }
    }
    SUBCASE("zero gamma with nonzero lambda is rejected") {
        cfg.lambda = 1.0;
        cfg.gamma = {0.0};
        CHECK_THROWS_AS(z_update(Image(12, 12, 0.0), t.ft, cfg), parameter_error);
    }
}

TEST_CASE("hqs run: objective descent, reduction case, determinism") {
    Toy t = make_toy(16, 12, 24, 4);
    Image gt = random_image(16, 16, 3, 0.0, 1.0);
    Sinogram y = select_views(forward_project(gt, t.g_ext), t.sel);

    HqsConfig cfg;
    cfg.lambda = 1e-2;
    cfg.gamma = {1.0};
    cfg.beta1 = 1.0;
    cfg.beta2 = 0.5;
    cfg.outer_iters = 4;
    cfg.cg_max_iters = 600;
    cfg.cg_tol = 1e-10;

    auto [u, st] = hqs_cg_run(y, t.g_meas, t.g_ext, t.sel, cfg, t.ft);
    REQUIRE(st.objective_history.size() == size_t(cfg.outer_iters + 1));
    for (size_t i = 1; i < st.objective_history.size(); ++i)
        CHECK(st.objective_history[i] <= st.objective_history[i - 1] + 1e-6);

    SUBCASE("pure least-squares variant also descends") {
        HqsConfig c2 = cfg;
        c2.lambda = 0.0;
        c2.gamma = {0.0};
        c2.beta2 = 0.0;
        auto [u2, st2] = hqs_cg_run(y, t.g_meas, t.g_ext, t.sel, c2, t.ft);
        for (size_t i = 1; i < st2.objective_history.size(); ++i)
            CHECK(st2.objective_history[i] <= st2.objective_history[i - 1] + 1e-6);
    }
    SUBCASE("same inputs give bit-identical runs") {
        auto [u2, st2] = hqs_cg_run(y, t.g_meas, t.g_ext, t.sel, cfg, t.ft);
        for (size_t i = 0; i < u.data.size(); ++i) CHECK(u.data[i] == u2.data[i]);
        CHECK(st.objective_history == st2.objective_history);
    }
}
