#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include "lact/fbp.hpp"
#include "lact/simulate.hpp"
#include "test_util.hpp"

using namespace lact;
using namespace lact::test;

TEST_CASE("ramp kernel: analytic taps, DC response bounded by the truncation tail") {
    for (FilterKind kind : {FilterKind::ram_lak, FilterKind::hann}) {
        for (int half : {400, 4000}) {
            FilterSpec f{kind, 1.0};
            auto taps = ramp_kernel(f, half, 1.0);
            double sum = 0.0;
            for (double t : taps) sum += t;
            // ideal taps sum to zero; truncation leaves at most ~1/(pi^2 half)
            CHECK(std::fabs(sum) <= 1.1 / (M_PI * M_PI * half));
        }
    }
    auto rl = ramp_kernel(FilterSpec{FilterKind::ram_lak, 1.0}, 400, 2.0);
    CHECK(rl[400] == doctest::Approx(1.0 / (4.0 * 2.0 * 2.0)).epsilon(1e-12));
    // odd taps -1/(pi^2 n^2 tau^2), even taps 0
    CHECK(rl[401] == doctest::Approx(-1.0 / (M_PI * M_PI * 4.0)).epsilon(1e-12));
    CHECK(std::fabs(rl[402]) < 1e-15);
}

TEST_CASE("filtering a constant row is zero where the kernel fully overlaps") {
    int d = 512;
    ScanGeometry g = make_scan_geometry(BeamMode::parallel, 0, 1, d, 64, 64, 1.0, 1.0);
    Sinogram y(g, 1.0);
    Sinogram q = filter_sinogram(y, FilterSpec{});
    CHECK(std::fabs(q.at(0, d / 2)) < 1e-3);  // truncation tail only
    Sinogram z(g, 0.0);
    Sinogram qz = filter_sinogram(z, FilterSpec{});
    for (double v : qz.data) CHECK(v == 0.0);
}

TEST_CASE("spatial filtering matches the transform-domain route") {
    int d = 64, pad = 4 * d;
    ScanGeometry g = make_scan_geometry(BeamMode::parallel, 0, 1, d, 32, 32, 1.0, 0.7);
    Sinogram y = random_sinogram(g, 99);
    Sinogram q = filter_sinogram(y, FilterSpec{});
    auto taps = ramp_kernel(FilterSpec{}, d - 1, 0.7);

    using cd = std::complex<double>;
    auto dft = [&](const std::vector<double>& x) {
        std::vector<cd> X(pad, cd(0, 0));
        for (int k = 0; k < pad; ++k)
            for (size_t j = 0; j < x.size(); ++j)
                X[k] += x[j] * std::exp(cd(0, -2.0 * M_PI * k * double(j) / pad));
        return X;
    };
    std::vector<double> row(y.data.begin(), y.data.end());
    std::vector<double> ker(taps.begin(), taps.end());
    auto R = dft(row), H = dft(ker);
    std::vector<double> conv(pad, 0.0);
    for (int i = 0; i < pad; ++i) {
        cd acc(0, 0);
        for (int k = 0; k < pad; ++k)
            acc += R[k] * H[k] * std::exp(cd(0, 2.0 * M_PI * k * double(i) / pad));
        conv[i] = acc.real() / pad;
    }
    double scale = 0.0;
    for (double v : q.data) scale = std::max(scale, std::fabs(v));
    for (int i = 0; i < d; ++i) CHECK(std::fabs(conv[i + d - 1] - q.at(0, i)) <= 1e-8 * scale);

    // the sampled kernel's transfer function is |w|/(2 pi tau) away from DC
    for (int k = pad / 16; k <= pad / 4; ++k) {
        double omega = 2.0 * M_PI * k / (pad * 0.7);
        CHECK(std::abs(H[k]) == doctest::Approx(omega / (2.0 * M_PI * 0.7)).epsilon(0.02));
    }
}

TEST_CASE("filter cutoff is validated") {
    FilterSpec zero{FilterKind::ram_lak, 0.0};
    FilterSpec big{FilterKind::ram_lak, 1.5};
    CHECK_THROWS_AS(zero.validate(), parameter_error);
    CHECK_THROWS_AS(big.validate(), parameter_error);
}

TEST_CASE("fbp reconstructs the Shepp-Logan phantom from a full fan scan") {
    PhantomSpec spec;
    spec.size = 128;
    Image gt = make_phantom(spec);
    ScanGeometry g = make_scan_geometry(BeamMode::fan, 0, 360, 800, 128, 128);
    Sinogram y = forward_project(gt, g);
    Image recon = fbp_reconstruct(y, g, FilterSpec{});
    double full_psnr = psnr_vs(recon, gt);
    CHECK(full_psnr >= 28.0);

    // limited-angle scan loses information
    ScanGeometry gl = make_scan_geometry(BeamMode::fan, 0, 90, 800, 128, 128);
    Sinogram yl = forward_project(gt, gl);
    Image reconl = fbp_reconstruct(yl, gl, FilterSpec{});
    CHECK(psnr_vs(reconl, gt) < full_psnr);

    Image zero = fbp_reconstruct(Sinogram(g, 0.0), g, FilterSpec{});
    for (double v : zero.data) CHECK(v == 0.0);
}

TEST_CASE("ril is linear and its adjoint passes the dot test") {
    for (BeamMode mode : {BeamMode::parallel, BeamMode::fan}) {
        ScanGeometry g = make_scan_geometry(mode, 0, 60, 64, 48, 48);
        FilterSpec f{FilterKind::hann, 0.9};
        for (int trial = 0; trial < 20; ++trial) {
            Sinogram y = random_sinogram(g, 300 + trial);
            Image u = random_image(48, 48, 400 + trial);
            Image ry = ril_apply(y, g, f);
            Sinogram rtu = ril_adjoint(u, g, f);
            double lhs = dot(ry.data, u.data);
            double rhs = dot(y.data, rtu.data);
            double denom = nrm2(ry.data) * nrm2(u.data);
            REQUIRE(denom > 0.0);
            CHECK(std::fabs(lhs - rhs) / denom < 1e-6);
        }
        Sinogram y = random_sinogram(g, 17);
        Image a = ril_apply(y, g, f);
        Sinogram y2 = y;
        for (double& v : y2.data) v *= -1.75;
        Image b = ril_apply(y2, g, f);
        double scale = 0.0;
        for (double v : a.data) scale = std::max(scale, std::fabs(v));
        for (size_t i = 0; i < a.data.size(); ++i)
            CHECK(std::fabs(b.data[i] + 1.75 * a.data[i]) <= 1e-12 * scale);

        Sinogram zt = ril_adjoint(Image(48, 48, 0.0), g, f);
        for (double v : zt.data) CHECK(v == 0.0);
    }
}

TEST_CASE("ril gradient matches finite differences") {
    ScanGeometry g = make_scan_geometry(BeamMode::fan, 0, 24, 32, 24, 24);
    FilterSpec f{};
    Sinogram y = random_sinogram(g, 55);
    Sinogram delta = random_sinogram(g, 56);
    auto J = [&](const Sinogram& s) {
        Image r = ril_apply(s, g, f);
        return 0.5 * dot(r.data, r.data);
    };
    Sinogram grad = ril_adjoint(ril_apply(y, g, f), g, f);
    double h = 1e-6;
    Sinogram yp = y, ym = y;
    for (size_t i = 0; i < y.data.size(); ++i) {
        yp.data[i] += h * delta.data[i];
        ym.data[i] -= h * delta.data[i];
    }
    double fd = (J(yp) - J(ym)) / (2.0 * h);
    double an = dot(grad.data, delta.data);
    CHECK(std::fabs(fd - an) <= 1e-4 * std::max(1.0, std::fabs(an)));
}

TEST_CASE("hann window amplifies noise less than ram-lak") {
    PhantomSpec spec;
    spec.size = 64;
    Image gt = make_phantom(spec);
    ScanGeometry g = make_scan_geometry(BeamMode::parallel, 0, 180, 96, 64, 64);
    Sinogram clean = forward_project(gt, g);
    auto variance_of = [&](FilterKind kind) {
        std::vector<double> mean(64 * 64, 0.0), m2(64 * 64, 0.0);
        const int n_seeds = 20;
        for (int s = 0; s < n_seeds; ++s) {
            NoiseModel nm;
            nm.gaussian_frac = 0.05;
            nm.poisson_i0 = 1e12;
            nm.seed = 900 + s;
            Image r = fbp_reconstruct(add_noise(clean, nm), g, FilterSpec{kind, 1.0});
            for (size_t i = 0; i < r.data.size(); ++i) {
                double d = r.data[i] - mean[i];
                mean[i] += d / (s + 1);
                m2[i] += d * (r.data[i] - mean[i]);
            }
        }
        double total = 0.0;
        for (double v : m2) total += v / (n_seeds - 1);
        return total;
    };
    CHECK(variance_of(FilterKind::hann) < variance_of(FilterKind::ram_lak));
}
