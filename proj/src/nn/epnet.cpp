#include "lact/nn/epnet.hpp"

#include <cmath>

namespace lact::nn {

Sinogram TapeBackend::sino_value(Sino x) const {
    const Tensor& v = t.val(x);
    const ScanGeometry& g = v.h == g_meas.n_views() ? g_meas : g_ext;
    return to_sinogram(v, g);
}

TapeBackend::Coefs TapeBackend::shrink(Coefs z, const std::vector<double>& thr_highpass) {
    std::vector<double> thr(t.val(z).ch, -1.0);  // lowpass channel passes through
    for (size_t i = 0; i < thr_highpass.size(); ++i) thr[1 + i] = thr_highpass[i];
    return t.softshrink(z, thr);
}

void EpnetConfig::validate(const ScanGeometry& g_meas) const {
    if (n_left < 0 || n_right < 0) throw parameter_error("epnet: negative extrapolation count");
    if (g_meas.n_views() + n_left + n_right > 180)
        throw parameter_error("epnet: extrapolated plus measured views exceed 180 degrees");
    if (hidden < 1) throw parameter_error("epnet: hidden channel count must be >= 1");
    hqs.validate();
    frame.validate();
    ril_filter.validate();
    loss_w.validate();
}

EpnetModel EpnetModel::build(const EpnetConfig& cfg) {
    EpnetModel m;
    m.cfg = cfg;
    m.epl_left = make_epl_branch("epl.left", cfg.hidden, false);
    m.epl_mid = make_epl_branch("epl.mid", cfg.hidden, true);
    m.epl_right = make_epl_branch("epl.right", cfg.hidden, false);
    m.senet = make_senet("senet", cfg.hidden);
    m.initcnn = make_initcnn("initcnn", cfg.hidden);
    m.epl_left.frozen = m.epl_mid.frozen = m.epl_right.frozen = cfg.freeze_epl;
    Rng rng(mix_seed(cfg.seed, 0xEF));
    init_network_params(m.epl_left, m.params, rng, cfg.identity_init);
    init_network_params(m.epl_mid, m.params, rng, cfg.identity_init);
    init_network_params(m.epl_right, m.params, rng, cfg.identity_init);
    init_network_params(m.senet, m.params, rng, cfg.identity_init);
    init_network_params(m.initcnn, m.params, rng, cfg.identity_init);
    return m;
}

void EpnetModel::set_epl_frozen(bool frozen) {
    cfg.freeze_epl = frozen;
    epl_left.frozen = epl_mid.frozen = epl_right.frozen = frozen;
    for (auto& e : params.entries)
        if (e.name.rfind("epl.", 0) == 0) e.frozen = frozen;
}

NodeId epl_forward(Tape& t, const EpnetModel& model, NodeId y_meas, int n_views) {
    const EpnetConfig& cfg = model.cfg;
    if (t.val(y_meas).h != n_views) throw dimension_error("epl_forward: row count mismatch");
    if (n_views + cfg.n_left + cfg.n_right > 180)
        throw parameter_error("epl_forward: extrapolated plus measured views exceed 180 degrees");
    NodeId mid = run_network(t, model.epl_mid, y_meas);
    NodeId out = mid;
    if (cfg.n_left > 0) {
        NodeId left_full = run_network(t, model.epl_left, y_meas);
        out = t.concat_rows(t.slice_rows(left_full, 0, cfg.n_left), out);
    }
    if (cfg.n_right > 0) {
        NodeId right_full = run_network(t, model.epl_right, y_meas);
        out = t.concat_rows(out, t.slice_rows(right_full, n_views - cfg.n_right, n_views));
    }
    return out;
}

NodeId initcnn_forward(Tape& t, const EpnetModel& model, NodeId u_img_branch,
                       NodeId u_sino_branch) {
    NodeId fused = run_network(t, model.initcnn, t.concat_ch(u_img_branch, u_sino_branch));
    return t.add(fused, u_img_branch);
}

EpnetForward epnet_forward(Tape& t, EpnetModel& model, const Sinogram& y_meas,
                           const ScanGeometry& g_meas, const ScanGeometry& g_ext,
                           const AngleSelector& sel, const DatasetItem* supervision) {
    const EpnetConfig& cfg = model.cfg;
    cfg.validate(g_meas);
    if (g_ext.n_views() != g_meas.n_views() + cfg.n_left + cfg.n_right)
        throw dimension_error("epnet_forward: extended geometry does not match extrapolation");

    NodeId y_leaf = t.constant(from_sinogram(y_meas));
    NodeId y_out = epl_forward(t, model, y_leaf, g_meas.n_views());
    NodeId y_se = run_network(t, model.senet, y_out);
    NodeId x_sino = t.ril(y_se, g_ext, cfg.ril_filter);
    NodeId u0 = t.ril(y_leaf, g_meas, cfg.ril_filter);

    TapeBackend bk{t, g_meas, g_ext, cfg.frame};
    auto hook = [&](int, NodeId u_prev) { return initcnn_forward(t, model, u_prev, x_sino); };
    auto res = run_unrolled(bk, y_leaf, u0, g_meas, g_ext, sel, cfg.frame, cfg.hqs, hook);

    EpnetForward out;
    out.recon = to_image(t.val(res.u_final));
    for (NodeId it : res.iterates) out.iterates.push_back(to_image(t.val(it)));
    out.y_tilde = to_sinogram(t.val(res.y_tilde), g_ext);
    out.y_out = to_sinogram(t.val(y_out), g_ext);
    out.y_se = to_sinogram(t.val(y_se), g_ext);
    out.sino_branch = to_image(t.val(x_sino));
    out.u0 = to_image(t.val(u0));

    if (supervision) {
        MsSsimSpec ssim;
        ssim.data_range = cfg.ssim_data_range;
        ssim.levels = MsSsimSpec::max_levels_for(supervision->gt.height, supervision->gt.width);
        ExtrapolationMask mask = ExtrapolationMask::from_selector(sel, g_ext);
        out.loss_node = total_loss_node(t, res.iterates, supervision->gt, y_out, y_se,
                                        supervision->extended_gt, mask, g_ext, cfg.ril_filter,
                                        cfg.loss_w, ssim);
        out.loss_value = t.val(out.loss_node).v[0];
        if (!std::isfinite(out.loss_value)) throw divergence_error("epnet: non-finite loss");
    }
    return out;
}

double epnet_mean_loss(EpnetModel& model, const std::vector<DatasetItem>& dataset,
                       const ScanGeometry& g_meas, const ScanGeometry& g_ext,
                       const AngleSelector& sel) {
    double acc = 0.0;
    for (const DatasetItem& item : dataset) {
        Tape t(&model.params);
        EpnetForward f = epnet_forward(t, model, item.measured, g_meas, g_ext, sel, &item);
        acc += f.loss_value;
    }
    return acc / static_cast<double>(dataset.size());
}

TrainResult epnet_train(EpnetModel& model, const std::vector<DatasetItem>& dataset,
                        const ScanGeometry& g_meas, const ScanGeometry& g_ext,
                        const AngleSelector& sel, int steps, const AdamParams& adam,
                        int pretrain_epl_steps, bool eval_mean_loss) {
    if (dataset.empty()) throw parameter_error("epnet_train: empty dataset");
    adam.validate();
    TrainResult result;

    if (pretrain_epl_steps > 0) {
        AdamOptimizer opt{adam, {}};
        ExtrapolationMask mask = ExtrapolationMask::from_selector(sel, g_ext);
        for (int step = 0; step < pretrain_epl_steps; ++step) {
            const DatasetItem& item = dataset[step % dataset.size()];
            Tape t(&model.params);
            NodeId y_leaf = t.constant(from_sinogram(item.measured));
            NodeId y_out = epl_forward(t, model, y_leaf, g_meas.n_views());
            NodeId loss =
                loss_epl_node(t, y_out, item.extended_gt, mask, g_ext, model.cfg.ril_filter);
            double lv = t.val(loss).v[0];
            if (!std::isfinite(lv)) throw divergence_error("epl pretraining: non-finite loss");
            model.params.zero_grads();
            t.backward(loss);
            opt.step(model.params);
            result.pretrain_curve.push_back(lv);
        }
        model.params.zero_grads();
    }

    if (eval_mean_loss)
        result.initial_mean_loss = epnet_mean_loss(model, dataset, g_meas, g_ext, sel);

    AdamOptimizer opt{adam, {}};
    for (int step = 0; step < steps; ++step) {
        const DatasetItem& item = dataset[step % dataset.size()];
        Tape t(&model.params);
        EpnetForward f = epnet_forward(t, model, item.measured, g_meas, g_ext, sel, &item);
        model.params.zero_grads();
        t.backward(f.loss_node);
        opt.step(model.params);
        result.loss_curve.push_back(f.loss_value);
    }
    model.params.zero_grads();

    if (eval_mean_loss)
        result.final_mean_loss = epnet_mean_loss(model, dataset, g_meas, g_ext, sel);
    return result;
}

}  // namespace lact::nn
