#pragma once

#include <optional>
#include <vector>

#include "lact/hqs.hpp"
#include "lact/nn/adam.hpp"
#include "lact/nn/losses.hpp"
#include "lact/nn/network.hpp"
#include "lact/simulate.hpp"

namespace lact::nn {

// Backend running the shared unrolled loop on the autodiff tape. Every op
// calls the same numeric kernels as PlainBackend, so a run with untrained
// (identity) networks reproduces the plain solver exactly.
struct TapeBackend {
    Tape& t;
    const ScanGeometry& g_meas;
    const ScanGeometry& g_ext;
    FrameTransform ft;

    using Img = NodeId;
    using Sino = NodeId;
    using Coefs = NodeId;
    using Sc = NodeId;

    Img const_img(const Image& v) { return t.constant(from_image(v)); }
    Sino const_sino(const Sinogram& v) { return t.constant(from_sinogram(v)); }
    Image img_value(Img x) { return to_image(t.val(x)); }
    Sinogram sino_value(Sino x) const;
    FrameCoeffs coef_value(Coefs z) { return to_coeffs(t.val(z), ft.levels); }

    Sino project(Img u, const ScanGeometry& g) { return t.project(u, g); }
    Img backproject(Sino y, const ScanGeometry& g) { return t.backproject(y, g); }
    Img ril(Sino y, const ScanGeometry& g, const FilterSpec& f) { return t.ril(y, g, f); }
    Coefs decompose(Img u, const FrameTransform& f) { return t.decompose(u, f); }
    Img reconstruct(Coefs z, const FrameTransform& f) { return t.reconstruct(z, f); }
    Coefs chan_scale(Coefs z, const std::vector<double>& w) { return t.chan_scale(z, w); }
    Coefs shrink(Coefs z, const std::vector<double>& thr_highpass);

    Img img_add(Img a, Img b) { return t.add(a, b); }
    Img img_sub(Img a, Img b) { return t.sub(a, b); }
    Img img_scale(Img x, double c) { return t.scale(x, c); }
    Img img_axpy(Sc a, Img x, Img y) { return t.axpy(a, x, y); }
    Sc img_dot(Img a, Img b) { return t.dot(a, b); }

    Sino sino_add(Sino a, Sino b) { return t.add(a, b); }
    Sino row_scale(Sino y, const std::vector<double>& w) { return t.row_scale(y, w); }
    Sino embed(Sino y, const AngleSelector& p, const ScanGeometry& ge) {
        return t.embed_rows(y, p, ge);
    }

    Sc sdiv(Sc a, Sc b) { return t.div(a, b); }
    Sc sneg(Sc a) { return t.scale(a, -1.0); }
    double value(Sc a) { return t.val(a).v[0]; }
};

struct EpnetConfig {
    int n_left = 15;
    int n_right = 15;
    int hidden = 16;
    HqsConfig hqs;
    FrameTransform frame;
    FilterSpec ril_filter;
    LossWeights loss_w;
    double ssim_data_range = 1.0;
    bool identity_init = false;  // zero final layers: the net starts as the plain solver
    bool freeze_epl = false;
    uint64_t seed = 1;

    void validate(const ScanGeometry& g_meas) const;
};

struct EpnetModel {
    EpnetConfig cfg;
    NetworkSpec epl_left, epl_mid, epl_right, senet, initcnn;
    ParamStore params;

    static EpnetModel build(const EpnetConfig& cfg);
    void set_epl_frozen(bool frozen);
};

// Three parallel branches: left/right crops predict the neighboring views,
// the middle branch denoises; outputs are concatenated along the view axis.
NodeId epl_forward(Tape& t, const EpnetModel& model, NodeId y_meas, int n_views);

// Shared-parameter fusion of the image-branch iterate and the sinogram-branch
// reconstruction into a CG initialization (residual on the image branch).
NodeId initcnn_forward(Tape& t, const EpnetModel& model, NodeId u_img_branch,
                       NodeId u_sino_branch);

struct EpnetForward {
    Image recon;
    std::vector<Image> iterates;
    Sinogram y_out, y_se, y_tilde;
    Image sino_branch, u0;
    NodeId loss_node = -1;
    double loss_value = 0.0;
};

// supervision == nullptr runs reconstruction only (no loss nodes).
EpnetForward epnet_forward(Tape& t, EpnetModel& model, const Sinogram& y_meas,
                           const ScanGeometry& g_meas, const ScanGeometry& g_ext,
                           const AngleSelector& sel, const DatasetItem* supervision);

struct TrainResult {
    std::vector<double> pretrain_curve;
    std::vector<double> loss_curve;
    double initial_mean_loss = 0.0;
    double final_mean_loss = 0.0;
};

// Adam on the total loss, batch size 1, samples visited in order. An optional
// pretraining phase first minimizes the extrapolation loss alone.
TrainResult epnet_train(EpnetModel& model, const std::vector<DatasetItem>& dataset,
                        const ScanGeometry& g_meas, const ScanGeometry& g_ext,
                        const AngleSelector& sel, int steps, const AdamParams& adam,
                        int pretrain_epl_steps = 0, bool eval_mean_loss = true);

double epnet_mean_loss(EpnetModel& model, const std::vector<DatasetItem>& dataset,
                       const ScanGeometry& g_meas, const ScanGeometry& g_ext,
                       const AngleSelector& sel);

}  // namespace lact::nn
