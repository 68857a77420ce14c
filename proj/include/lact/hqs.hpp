#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "lact/core.hpp"
#include "lact/fbp.hpp"
#include "lact/framelet.hpp"
#include "lact/geometry.hpp"

namespace lact {

// Scalar weights of the splitting objective
//   0.5|Au - Y|^2 + lambda|z|_1 + 0.5 sum_i gamma_i |W_i u - z_i|^2
//   + beta1 |P Yt - Y|^2 + beta2 |At u - Yt|^2
// plus the solver depth knobs. gamma may hold one broadcast entry or one
// entry per highpass channel.
struct HqsConfig {
    double lambda = 1e-3;
    std::vector<double> gamma = {1.0};
    double beta1 = 1.0;
    double beta2 = 0.1;
    int outer_iters = 3;
    int cg_max_iters = 30;
    double cg_tol = 1e-6;
    bool record_objective = true;

    void validate() const;
    // per-highpass-channel gamma, broadcast as needed
    std::vector<double> channel_gammas(int n_highpass) const;
    // per-highpass-channel shrinkage thresholds lambda/gamma_i
    std::vector<double> thresholds(int n_highpass) const;
};

struct HqsState {
    Image u;
    FrameCoeffs z;
    Sinogram y_tilde;
    int iterations = 0;
    std::vector<double> objective_history;
    std::vector<double> cg_rel_residuals;
    std::vector<int> cg_iters;
};

struct CgResult {
    Image x;
    double rel_residual = 0.0;
    int iters = 0;
};

CgResult cg_solve(const std::function<Image(const Image&)>& apply_operator, const Image& rhs,
                  const Image& x0, int max_iters, double tol);

// Rowwise exact minimizer of beta1|P Yt - Y|^2 + beta2|At u - Yt|^2.
Sinogram y_tilde_update(const Sinogram& y, const Image& u, const AngleSelector& p,
                        const ScanGeometry& g_ext, double beta1, double beta2);

struct UUpdateResult {
    Image u;
    double rel_residual = 0.0;
    int iters = 0;
};

UUpdateResult u_update(const Sinogram& y, const Sinogram& y_tilde, const FrameCoeffs& z,
                       const ScanGeometry& g_meas, const ScanGeometry& g_ext,
                       const AngleSelector& p, const FrameTransform& ft, const HqsConfig& cfg,
                       const Image& u_init);

FrameCoeffs z_update(const Image& u, const FrameTransform& ft, const HqsConfig& cfg);

double hqs_objective(const Sinogram& y, const Image& u, const FrameCoeffs& z,
                     const Sinogram& y_tilde, const ScanGeometry& g_meas,
                     const ScanGeometry& g_ext, const AngleSelector& p, const FrameTransform& ft,
                     const HqsConfig& cfg);

// Maps (current iterate, sinogram-branch image) to the CG initialization.
using InitHook = std::function<Image(const Image&, const Image&)>;

std::pair<Image, HqsState> hqs_cg_run(const Sinogram& y, const ScanGeometry& g_meas,
                                      const ScanGeometry& g_ext, const AngleSelector& p,
                                      const HqsConfig& cfg, const FrameTransform& ft = {},
                                      const FilterSpec& init_filter = {},
                                      const InitHook& init_hook = nullptr);

// ---------------------------------------------------------------------------
// Backend-generic machinery. The same loop drives the plain solver and the
// autodiff tape, so the two execute identical arithmetic in identical order.
// A backend provides value-semantic handles Img/Sino/Coefs/Sc plus the ops
// used below; see PlainBackend for the reference implementation.
// ---------------------------------------------------------------------------

struct PlainBackend {
    using Img = Image;
    using Sino = Sinogram;
    using Coefs = FrameCoeffs;
    using Sc = double;

    Img const_img(const Image& v) { return v; }
    Sino const_sino(const Sinogram& v) { return v; }
    Image img_value(const Img& x) { return x; }
    Sinogram sino_value(const Sino& x) { return x; }
    FrameCoeffs coef_value(const Coefs& x) { return x; }

    Sino project(const Img& u, const ScanGeometry& g) { return forward_project(u, g); }
    Img backproject(const Sino& y, const ScanGeometry& g) { return back_project(y, g); }
    Img ril(const Sino& y, const ScanGeometry& g, const FilterSpec& f) {
        return ril_apply(y, g, f);
    }
    Coefs decompose(const Img& u, const FrameTransform& t) { return frame_decompose(u, t); }
    Img reconstruct(const Coefs& z, const FrameTransform& t) { return frame_reconstruct(z, t); }
    Coefs chan_scale(const Coefs& z, const std::vector<double>& w) {
        FrameCoeffs out = z;
        for (size_t ch = 0; ch < out.channels.size(); ++ch)
            for (double& x : out.channels[ch]) x *= w[ch];
        return out;
    }
    Coefs shrink(const Coefs& z, const std::vector<double>& thr) { return soft_threshold(z, thr); }

    Img img_add(const Img& a, const Img& b) {
        Img out = a;
        out.data = add(a.data, b.data);
        return out;
    }
    Img img_sub(const Img& a, const Img& b) {
        Img out = a;
        out.data = sub(a.data, b.data);
        return out;
    }
    Img img_scale(const Img& x, double a) {
        Img out = x;
        out.data = scale(a, x.data);
        return out;
    }
    Img img_axpy(const Sc& a, const Img& x, const Img& y) {
        Img out = x;
        out.data = axpy(a, x.data, y.data);
        return out;
    }
    Sc img_dot(const Img& a, const Img& b) { return dot(a.data, b.data); }

    Sino sino_add(const Sino& a, const Sino& b) {
        Sino out = a;
        out.data = add(a.data, b.data);
        return out;
    }
    Sino row_scale(const Sino& y, const std::vector<double>& w) {
        Sino out = y;
        int D = y.bins();
        for (int v = 0; v < y.views(); ++v)
            for (int d = 0; d < D; ++d) out.at(v, d) = y.at(v, d) * w[v];
        return out;
    }
    Sino embed(const Sino& y, const AngleSelector& p, const ScanGeometry& g_ext) {
        return embed_views(y, p, g_ext);
    }

    Sc sdiv(const Sc& a, const Sc& b) { return a / b; }
    Sc sneg(const Sc& a) { return -a; }
    double value(const Sc& a) { return a; }
};

template <class B>
struct CgGenericResult {
    typename B::Img x;
    double rel_residual = 0.0;
    int iters = 0;
};

template <class B, class Apply>
CgGenericResult<B> cg_generic(B& bk, Apply&& apply, const typename B::Img& rhs,
                              const typename B::Img& x0, int max_iters, double tol) {
    CgGenericResult<B> out{x0, 0.0, 0};
    auto r = bk.img_sub(rhs, apply(x0));
    auto p = r;
    auto rs = bk.img_dot(r, r);
    double bnorm = std::sqrt(std::max(0.0, bk.value(bk.img_dot(rhs, rhs))));
    if (bnorm == 0.0) bnorm = 1.0;
    double rel = std::sqrt(std::max(0.0, bk.value(rs))) / bnorm;
    while (out.iters < max_iters && rel > tol) {
        auto Ap = apply(p);
        auto alpha = bk.sdiv(rs, bk.img_dot(p, Ap));
        out.x = bk.img_axpy(alpha, p, out.x);
        r = bk.img_axpy(bk.sneg(alpha), Ap, r);
        auto rs_new = bk.img_dot(r, r);
        auto beta = bk.sdiv(rs_new, rs);
        p = bk.img_axpy(beta, p, r);
        rs = rs_new;
        ++out.iters;
        double v = bk.value(rs);
        if (!std::isfinite(v)) throw divergence_error("cg: residual became non-finite");
        rel = std::sqrt(std::max(0.0, v)) / bnorm;
    }
    out.rel_residual = rel;
    return out;
}

// Row weights of the closed-form y_tilde update over the extended geometry.
struct YTildeWeights {
    std::vector<double> on_projection;  // multiplies At u
    std::vector<double> on_measured;    // multiplies P^T Y
};

YTildeWeights y_tilde_weights(const AngleSelector& p, int n_ext_views, double beta1, double beta2);

template <class B>
struct UnrolledResult {
    typename B::Img u_final;
    std::vector<typename B::Img> iterates;  // u^1 .. u^N
    typename B::Sino y_tilde;
    typename B::Coefs z;
    std::vector<double> objective_history;
    std::vector<double> cg_rel_residuals;
    std::vector<int> cg_iters;
};

// N outer iterations of (y_tilde update, CG u-update from hook(k, u), z
// update), starting from iterate u0 and measured data y_leaf.
template <class B, class Hook>
UnrolledResult<B> run_unrolled(B& bk, const typename B::Sino& y_leaf, typename B::Img u0,
                               const ScanGeometry& g_meas, const ScanGeometry& g_ext,
                               const AngleSelector& sel, const FrameTransform& ft,
                               const HqsConfig& cfg, Hook&& hook) {
    cfg.validate();
    int M = ft.highpass_channels();
    std::vector<double> gam = cfg.channel_gammas(M);
    std::vector<double> thr = cfg.thresholds(M);
    std::vector<double> chan_w(ft.total_channels(), 0.0);
    bool any_gamma = false;
    for (int i = 0; i < M; ++i) {
        chan_w[1 + i] = gam[i];
        any_gamma = any_gamma || gam[i] != 0.0;
    }
    YTildeWeights yw = y_tilde_weights(sel, g_ext.n_views(), cfg.beta1, cfg.beta2);

    auto apply_system = [&](const typename B::Img& x) {
        auto acc = bk.backproject(bk.project(x, g_meas), g_meas);
        if (any_gamma)
            acc = bk.img_add(acc, bk.reconstruct(bk.chan_scale(bk.decompose(x, ft), chan_w), ft));
        if (cfg.beta2 != 0.0)
            acc = bk.img_add(
                acc, bk.img_scale(bk.backproject(bk.project(x, g_ext), g_ext), 2.0 * cfg.beta2));
        return acc;
    };

    auto rhs_data = bk.backproject(y_leaf, g_meas);  // A^T Y, constant across iterations
    auto y_embedded = bk.row_scale(bk.embed(y_leaf, sel, g_ext), yw.on_measured);

    UnrolledResult<B> out;
    auto u = u0;
    auto zc = bk.decompose(u, ft);
    auto z = bk.shrink(zc, thr);
    typename B::Sino y_tilde{};
    for (int k = 0; k < cfg.outer_iters; ++k) {
        y_tilde = bk.sino_add(bk.row_scale(bk.project(u, g_ext), yw.on_projection), y_embedded);
        if (cfg.record_objective && k == 0)
            out.objective_history.push_back(
                hqs_objective(bk.sino_value(y_leaf), bk.img_value(u), bk.coef_value(z),
                              bk.sino_value(y_tilde), g_meas, g_ext, sel, ft, cfg));
        auto rhs = rhs_data;
        if (any_gamma) rhs = bk.img_add(rhs, bk.reconstruct(bk.chan_scale(z, chan_w), ft));
        if (cfg.beta2 != 0.0)
            rhs = bk.img_add(rhs,
                             bk.img_scale(bk.backproject(y_tilde, g_ext), 2.0 * cfg.beta2));
        auto x0 = hook(k, u);
        auto cg = cg_generic(bk, apply_system, rhs, x0, cfg.cg_max_iters, cfg.cg_tol);
        u = cg.x;
        out.cg_rel_residuals.push_back(cg.rel_residual);
        out.cg_iters.push_back(cg.iters);
        zc = bk.decompose(u, ft);
        z = bk.shrink(zc, thr);
        out.iterates.push_back(u);
        if (cfg.record_objective)
            out.objective_history.push_back(
                hqs_objective(bk.sino_value(y_leaf), bk.img_value(u), bk.coef_value(z),
                              bk.sino_value(y_tilde), g_meas, g_ext, sel, ft, cfg));
    }
    out.u_final = u;
    out.y_tilde = y_tilde;
    out.z = z;
    return out;
}

}  // namespace lact
