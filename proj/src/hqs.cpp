#include "lact/hqs.hpp"

#include <algorithm>

namespace lact {

void HqsConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw parameter_error("hqs: lambda must be finite and >= 0");
    if (gamma.empty()) throw parameter_error("hqs: gamma must not be empty");
    for (double g : gamma)
        if (!(g >= 0.0) || !std::isfinite(g))
            throw parameter_error("hqs: gamma entries must be finite and >= 0");
    if (!(beta1 >= 0.0) || !(beta2 >= 0.0))
        throw parameter_error("hqs: beta weights must be >= 0");
    if (outer_iters < 1) throw parameter_error("hqs: outer_iters must be >= 1");
    if (cg_max_iters < 1) throw parameter_error("hqs: cg_max_iters must be >= 1");
    if (!(cg_tol >= 0.0)) throw parameter_error("hqs: cg_tol must be >= 0");
}

std::vector<double> HqsConfig::channel_gammas(int n_highpass) const {
    if (static_cast<int>(gamma.size()) == n_highpass) return gamma;
    if (gamma.size() == 1) return std::vector<double>(n_highpass, gamma[0]);
    throw parameter_error("hqs: gamma must have one entry or one per highpass channel");
}

std::vector<double> HqsConfig::thresholds(int n_highpass) const {
    std::vector<double> gam = channel_gammas(n_highpass);
    std::vector<double> thr(n_highpass, 0.0);
    for (int i = 0; i < n_highpass; ++i) {
        if (lambda == 0.0) continue;
        if (gam[i] == 0.0)
            throw parameter_error("hqs: zero gamma with nonzero lambda has no minimizer");
        thr[i] = lambda / gam[i];
    }
    return thr;
}

CgResult cg_solve(const std::function<Image(const Image&)>& apply_operator, const Image& rhs,
                  const Image& x0, int max_iters, double tol) {
    PlainBackend bk;
    auto r = cg_generic(bk, [&](const Image& x) { return apply_operator(x); }, rhs, x0, max_iters,
                        tol);
    return {r.x, r.rel_residual, r.iters};
}

YTildeWeights y_tilde_weights(const AngleSelector& p, int n_ext_views, double beta1,
                              double beta2) {
    if (!(beta1 + beta2 > 0.0)) throw parameter_error("y_tilde_update: beta1 + beta2 must be > 0");
    p.validate(n_ext_views);
    YTildeWeights w;
    w.on_projection.assign(n_ext_views, 1.0);
    w.on_measured.assign(n_ext_views, 0.0);
    double denom = beta1 + beta2;
    for (int idx : p.measured_indices) {
        w.on_projection[idx] = beta2 / denom;
        w.on_measured[idx] = beta1 / denom;
    }
    return w;
}

Sinogram y_tilde_update(const Sinogram& y, const Image& u, const AngleSelector& p,
                        const ScanGeometry& g_ext, double beta1, double beta2) {
    if (y.views() != p.count()) throw dimension_error("y_tilde_update: selector/measured mismatch");
    YTildeWeights w = y_tilde_weights(p, g_ext.n_views(), beta1, beta2);
    PlainBackend bk;
    return bk.sino_add(bk.row_scale(forward_project(u, g_ext), w.on_projection),
                       bk.row_scale(embed_views(y, p, g_ext), w.on_measured));
}

UUpdateResult u_update(const Sinogram& y, const Sinogram& y_tilde, const FrameCoeffs& z,
                       const ScanGeometry& g_meas, const ScanGeometry& g_ext,
                       const AngleSelector& p, const FrameTransform& ft, const HqsConfig& cfg,
                       const Image& u_init) {
    cfg.validate();
    (void)p;
    int M = ft.highpass_channels();
    std::vector<double> gam = cfg.channel_gammas(M);
    std::vector<double> chan_w(ft.total_channels(), 0.0);
    bool any_gamma = false;
    for (int i = 0; i < M; ++i) {
        chan_w[1 + i] = gam[i];
        any_gamma = any_gamma || gam[i] != 0.0;
    }
    PlainBackend bk;
    auto apply = [&](const Image& x) {
        Image acc = back_project(forward_project(x, g_meas), g_meas);
        if (any_gamma)
            acc = bk.img_add(acc,
                             frame_reconstruct(bk.chan_scale(frame_decompose(x, ft), chan_w), ft));
        if (cfg.beta2 != 0.0)
            acc = bk.img_add(
                acc, bk.img_scale(back_project(forward_project(x, g_ext), g_ext), 2.0 * cfg.beta2));
        return acc;
    };
    Image rhs = back_project(y, g_meas);
    if (any_gamma) rhs = bk.img_add(rhs, frame_reconstruct(bk.chan_scale(z, chan_w), ft));
    if (cfg.beta2 != 0.0)
        rhs = bk.img_add(rhs, bk.img_scale(back_project(y_tilde, g_ext), 2.0 * cfg.beta2));
    CgResult r = cg_solve(apply, rhs, u_init, cfg.cg_max_iters, cfg.cg_tol);
    return {std::move(r.x), r.rel_residual, r.iters};
}

FrameCoeffs z_update(const Image& u, const FrameTransform& ft, const HqsConfig& cfg) {
    cfg.validate();
    return soft_threshold(frame_decompose(u, ft), cfg.thresholds(ft.highpass_channels()));
}

double hqs_objective(const Sinogram& y, const Image& u, const FrameCoeffs& z,
                     const Sinogram& y_tilde, const ScanGeometry& g_meas,
                     const ScanGeometry& g_ext, const AngleSelector& p, const FrameTransform& ft,
                     const HqsConfig& cfg) {
    int M = ft.highpass_channels();
    std::vector<double> gam = cfg.channel_gammas(M);

    Sinogram au = forward_project(u, g_meas);
    double data = 0.0;
    for (size_t i = 0; i < au.data.size(); ++i) {
        double d = au.data[i] - y.data[i];
        data += d * d;
    }
    data *= 0.5;

    double l1 = 0.0;
    for (int i = 0; i < M; ++i) l1 += sum_abs(z.highpass(i));
    l1 *= cfg.lambda;

    FrameCoeffs wu = frame_decompose(u, ft);
    double split = 0.0;
    for (int i = 0; i < M; ++i) {
        double s = 0.0;
        const auto& a = wu.highpass(i);
        const auto& b = z.highpass(i);
        for (size_t j = 0; j < a.size(); ++j) {
            double d = a[j] - b[j];
            s += d * d;
        }
        split += gam[i] * s;
    }
    split *= 0.5;

    Sinogram sel = select_views(y_tilde, p);
    double cons = 0.0;
    for (size_t i = 0; i < sel.data.size(); ++i) {
        double d = sel.data[i] - y.data[i];
        cons += d * d;
    }
    cons *= cfg.beta1;

    Sinogram atu = forward_project(u, g_ext);
    double ext = 0.0;
    for (size_t i = 0; i < atu.data.size(); ++i) {
        double d = atu.data[i] - y_tilde.data[i];
        ext += d * d;
    }
    ext *= cfg.beta2;

    return data + l1 + split + cons + ext;
}

std::pair<Image, HqsState> hqs_cg_run(const Sinogram& y, const ScanGeometry& g_meas,
                                      const ScanGeometry& g_ext, const AngleSelector& p,
                                      const HqsConfig& cfg, const FrameTransform& ft,
                                      const FilterSpec& init_filter, const InitHook& init_hook) {
    cfg.validate();
    ft.validate();
    if (y.views() != g_meas.n_views() || y.bins() != g_meas.n_detectors)
        throw dimension_error("hqs_cg_run: sinogram does not match measured geometry");
    if (p.count() != g_meas.n_views())
        throw dimension_error("hqs_cg_run: selector does not match measured geometry");

    PlainBackend bk;
    Image u0 = fbp_reconstruct(y, g_meas, init_filter);
    Image sino_branch = u0;
    auto hook = [&](int, const Image& u_prev) {
        return init_hook ? init_hook(u_prev, sino_branch) : u_prev;
    };
    auto res = run_unrolled(bk, y, u0, g_meas, g_ext, p, ft, cfg, hook);

    HqsState st;
    st.u = res.u_final;
    st.z = res.z;
    st.y_tilde = res.y_tilde;
    st.iterations = cfg.outer_iters;
    st.objective_history = std::move(res.objective_history);
    st.cg_rel_residuals = std::move(res.cg_rel_residuals);
    st.cg_iters = std::move(res.cg_iters);
    return {st.u, st};
}

}  // namespace lact
