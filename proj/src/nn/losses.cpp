#include "lact/nn/losses.hpp"

#include <cmath>

namespace lact::nn {

namespace {

const double kMsSsimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

std::vector<double> gaussian_taps(int ksize, double sigma) {
    std::vector<double> taps(ksize);
    double c = 0.5 * (ksize - 1), sum = 0.0;
    for (int i = 0; i < ksize; ++i) {
        taps[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
        sum += taps[i];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

}  // namespace

ExtrapolationMask ExtrapolationMask::from_selector(const AngleSelector& sel,
                                                   const ScanGeometry& g_ext) {
    sel.validate(g_ext.n_views());
    ExtrapolationMask mask;
    mask.views = g_ext.n_views();
    mask.bins = g_ext.n_detectors;
    mask.m.assign(static_cast<size_t>(mask.views) * mask.bins, 1.0);
    for (int idx : sel.measured_indices)
        for (int d = 0; d < mask.bins; ++d) mask.m[static_cast<size_t>(idx) * mask.bins + d] = 0.0;
    return mask;
}

void ExtrapolationMask::validate(const ScanGeometry& g_ext) const {
    if (views != g_ext.n_views() || bins != g_ext.n_detectors)
        throw dimension_error("extrapolation mask: shape does not match extended geometry");
    for (double v : m)
        if (v != 0.0 && v != 1.0) throw parameter_error("extrapolation mask: entries must be 0/1");
}

Tensor ExtrapolationMask::one_plus() const {
    Tensor t(1, views, bins);
    for (size_t i = 0; i < m.size(); ++i) t.v[i] = 1.0 + m[i];
    return t;
}

void LossWeights::validate() const {
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw parameter_error("loss: mu must be finite >= 0");
}

void MsSsimSpec::validate() const {
    if (levels < 1 || levels > 5) throw parameter_error("ms-ssim: levels must be in 1..5");
    if (ksize < 3 || ksize % 2 == 0) throw parameter_error("ms-ssim: kernel size must be odd >= 3");
    if (!(sigma > 0.0) || !(data_range > 0.0))
        throw parameter_error("ms-ssim: sigma and data_range must be positive");
}

int MsSsimSpec::max_levels_for(int h, int w, int ksize) {
    int lev = 0, s = std::min(h, w);
    while (lev < 5 && s >= ksize) {
        ++lev;
        s /= 2;
    }
    return lev;
}

NodeId ms_ssim_node(Tape& t, NodeId a, NodeId b, const MsSsimSpec& spec) {
    spec.validate();
    const Tensor& ta = t.val(a);
    if (!ta.same_shape(t.val(b))) throw dimension_error("ms-ssim: image shapes differ");
    int min_side = std::min(ta.h, ta.w);
    if ((min_side >> (spec.levels - 1)) < spec.ksize)
        throw parameter_error("ms-ssim: image too small for the requested level count");

    std::vector<double> taps = gaussian_taps(spec.ksize, spec.sigma);
    double c1 = spec.k1 * spec.data_range * spec.k1 * spec.data_range;
    double c2 = spec.k2 * spec.data_range * spec.k2 * spec.data_range;

    double wsum = 0.0;
    for (int l = 0; l < spec.levels; ++l) wsum += kMsSsimWeights[l];

    NodeId result = t.constant(Tensor::scalar(1.0));
    NodeId xa = a, xb = b;
    for (int level = 0; level < spec.levels; ++level) {
        NodeId mu_a = t.gauss_blur(xa, taps);
        NodeId mu_b = t.gauss_blur(xb, taps);
        NodeId mu_aa = t.mul(mu_a, mu_a);
        NodeId mu_bb = t.mul(mu_b, mu_b);
        NodeId mu_ab = t.mul(mu_a, mu_b);
        NodeId sig_aa = t.sub(t.gauss_blur(t.mul(xa, xa), taps), mu_aa);
        NodeId sig_bb = t.sub(t.gauss_blur(t.mul(xb, xb), taps), mu_bb);
        NodeId sig_ab = t.sub(t.gauss_blur(t.mul(xa, xb), taps), mu_ab);

        const Tensor& shape = t.val(sig_ab);
        NodeId c2n = t.constant(Tensor(shape.ch, shape.h, shape.w, c2));
        NodeId cs_map = t.div(t.add(t.scale(sig_ab, 2.0), c2n),
                              t.add(t.add(sig_aa, sig_bb), c2n));
        bool last = level == spec.levels - 1;
        double expo = kMsSsimWeights[level] / wsum;
        if (!last) {
            result = t.mul(result, t.powc(t.mean(cs_map), expo));
            xa = t.avgpool2(xa);
            xb = t.avgpool2(xb);
        } else {
            NodeId c1n = t.constant(Tensor(shape.ch, shape.h, shape.w, c1));
            NodeId l_map = t.div(t.add(t.scale(mu_ab, 2.0), c1n),
                                 t.add(t.add(mu_aa, mu_bb), c1n));
            result = t.mul(result, t.powc(t.mean(t.mul(l_map, cs_map)), expo));
        }
    }
    return result;
}

double ms_ssim(const Image& a, const Image& b, const MsSsimSpec& spec) {
    Tape t;
    NodeId na = t.constant(from_image(a));
    NodeId nb = t.constant(from_image(b));
    return t.val(ms_ssim_node(t, na, nb, spec)).v[0];
}

NodeId loss_epl_node(Tape& t, NodeId y_out, const Sinogram& y_gt, const ExtrapolationMask& mask,
                     const ScanGeometry& g_ext, const FilterSpec& f) {
    mask.validate(g_ext);
    const Tensor& out = t.val(y_out);
    if (out.h != y_gt.views() || out.w != y_gt.bins())
        throw dimension_error("loss_epl: prediction and target shapes differ");
    NodeId gt = t.constant(from_sinogram(y_gt));
    NodeId sino_term = t.weighted_sum_abs(t.sub(y_out, gt), mask.one_plus());
    NodeId ril_gt = t.constant(from_image(ril_apply(y_gt, g_ext, f)));
    NodeId ril_term = t.sum_abs(t.sub(t.ril(y_out, g_ext, f), ril_gt));
    return t.add(sino_term, ril_term);
}

double loss_epl(const Sinogram& y_out, const Sinogram& y_gt, const ExtrapolationMask& mask,
                const FilterSpec& f) {
    Tape t;
    NodeId n = t.constant(from_sinogram(y_out));
    return t.val(loss_epl_node(t, n, y_gt, mask, y_out.geom, f)).v[0];
}

NodeId loss_se_node(Tape& t, NodeId y_se, const Sinogram& y_gt, const Image& u_gt,
                    const ScanGeometry& g_ext, const FilterSpec& f) {
    const Tensor& se = t.val(y_se);
    if (se.h != y_gt.views() || se.w != y_gt.bins())
        throw dimension_error("loss_se: prediction and target shapes differ");
    NodeId gt = t.constant(from_sinogram(y_gt));
    NodeId sino_term = t.sum_abs(t.sub(y_se, gt));
    NodeId img_term = t.sum_abs(t.sub(t.ril(y_se, g_ext, f), t.constant(from_image(u_gt))));
    return t.add(sino_term, img_term);
}

double loss_se(const Sinogram& y_se, const Sinogram& y_gt, const Image& u_gt,
               const FilterSpec& f) {
    Tape t;
    NodeId n = t.constant(from_sinogram(y_se));
    return t.val(loss_se_node(t, n, y_gt, u_gt, y_se.geom, f)).v[0];
}

NodeId total_loss_node(Tape& t, const std::vector<NodeId>& iterates, const Image& u_gt,
                       NodeId y_out, NodeId y_se, const Sinogram& y_gt,
                       const ExtrapolationMask& mask, const ScanGeometry& g_ext,
                       const FilterSpec& f, const LossWeights& w, const MsSsimSpec& ssim) {
    if (iterates.empty()) throw parameter_error("total_loss: need at least one iterate");
    w.validate();
    NodeId gt = t.constant(from_image(u_gt));
    NodeId acc = t.sqrt_s(t.dot(t.sub(iterates[0], gt), t.sub(iterates[0], gt)));
    for (size_t i = 1; i < iterates.size(); ++i) {
        NodeId d = t.sub(iterates[i], gt);
        acc = t.add(acc, t.sqrt_s(t.dot(d, d)));
    }
    NodeId one = t.constant(Tensor::scalar(1.0));
    NodeId ssim_loss = t.sub(one, ms_ssim_node(t, iterates.back(), gt, ssim));
    acc = t.add(acc, t.scale(ssim_loss, w.mu));
    acc = t.add(acc, loss_epl_node(t, y_out, y_gt, mask, g_ext, f));
    acc = t.add(acc, loss_se_node(t, y_se, y_gt, u_gt, g_ext, f));
    return acc;
}

double total_loss(const std::vector<Image>& iterates, const Image& u_gt, const Sinogram& y_out,
                  const Sinogram& y_se, const Sinogram& y_gt, const ExtrapolationMask& mask,
                  const FilterSpec& f, const LossWeights& w, const MsSsimSpec& ssim) {
    Tape t;
    std::vector<NodeId> us;
    for (const Image& u : iterates) us.push_back(t.constant(from_image(u)));
    NodeId yo = t.constant(from_sinogram(y_out));
    NodeId ys = t.constant(from_sinogram(y_se));
    return t.val(total_loss_node(t, us, u_gt, yo, ys, y_gt, mask, y_out.geom, f, w, ssim)).v[0];
}

}  // namespace lact::nn
