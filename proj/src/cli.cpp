#include "lact/cli.hpp"

#include <chrono>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "lact/fbp.hpp"
#include "lact/hqs.hpp"
#include "lact/io.hpp"
#include "lact/metrics.hpp"
#include "lact/nn/epnet.hpp"
#include "lact/simulate.hpp"

namespace lact::cli {

namespace {

struct Stage {
    std::string name = "startup";
};

struct GeomFlags {
    std::string mode = "fan";
    int alpha_max = 90;
    int detectors = 800;
    int size = 128;
    double pixel_spacing = 0.0;  // 0 requests the subcommand default
    double det_spacing = 0.0;
    double sid = 0.0, sdd = 0.0;
    int extrap_left = 0, extrap_right = 0;
};

void add_geometry_flags(CLI::App* cmd, GeomFlags& g, int default_left, int default_right) {
    g.extrap_left = default_left;
    g.extrap_right = default_right;
    cmd->add_option("--mode", g.mode, "beam geometry: fan or parallel")
        ->check(CLI::IsMember({"fan", "parallel"}))
        ->capture_default_str();
    cmd->add_option("--alpha-max", g.alpha_max, "measured views, one per degree from 0")
        ->capture_default_str();
    cmd->add_option("--detectors", g.detectors, "detector element count")->capture_default_str();
    cmd->add_option("--size", g.size, "image side length in pixels")->capture_default_str();
    cmd->add_option("--pixel-spacing", g.pixel_spacing, "pixel pitch (0 = default)");
    cmd->add_option("--det-spacing", g.det_spacing, "detector pitch (0 = automatic)");
    cmd->add_option("--sid", g.sid, "source-to-isocenter distance (0 = automatic)");
    cmd->add_option("--sdd", g.sdd, "source-to-detector distance (0 = automatic)");
    cmd->add_option("--extrap-left", g.extrap_left, "extrapolated views before angle 0")
        ->capture_default_str();
    cmd->add_option("--extrap-right", g.extrap_right, "extrapolated views after alpha_max")
        ->capture_default_str();
}

BeamMode beam_of(const std::string& m) {
    return m == "parallel" ? BeamMode::parallel : BeamMode::fan;
}

double default_pixel_spacing(const GeomFlags& g, bool simulation_scale) {
    if (g.pixel_spacing > 0.0) return g.pixel_spacing;
    return simulation_scale ? 4.0 / g.size : 1.0;
}

ScanGeometry measured_geometry(const GeomFlags& g, bool simulation_scale) {
    return make_scan_geometry(beam_of(g.mode), 0, g.alpha_max, g.detectors, g.size, g.size,
                              default_pixel_spacing(g, simulation_scale), g.det_spacing, g.sid,
                              g.sdd);
}

struct HqsFlags {
    double lambda = 1e-3;
    double gamma = 1.0;
    double beta1 = 1.0;
    double beta2 = 0.1;
    int outer = 3;
    int cg_iters = 30;
    double cg_tol = 1e-6;
    int levels = 1;
    std::string filter = "ram-lak";
    double cutoff = 1.0;
};

void add_hqs_flags(CLI::App* cmd, HqsFlags& h) {
    cmd->add_option("--lambda", h.lambda, "l1 weight")->capture_default_str();
    cmd->add_option("--gamma", h.gamma, "frame split weight")->capture_default_str();
    cmd->add_option("--beta1", h.beta1, "measured-consistency weight")->capture_default_str();
    cmd->add_option("--beta2", h.beta2, "extended-consistency weight")->capture_default_str();
    cmd->add_option("--outer", h.outer, "outer iterations")->capture_default_str();
    cmd->add_option("--cg-iters", h.cg_iters, "cg iterations per outer step")
        ->capture_default_str();
    cmd->add_option("--cg-tol", h.cg_tol, "cg relative residual tolerance")
        ->capture_default_str();
    cmd->add_option("--levels", h.levels, "frame decomposition levels")->capture_default_str();
    cmd->add_option("--filter", h.filter, "fbp filter: ram-lak or hann")
        ->check(CLI::IsMember({"ram-lak", "hann"}))
        ->capture_default_str();
    cmd->add_option("--cutoff", h.cutoff, "filter cutoff (fraction of Nyquist)")
        ->capture_default_str();
}

HqsConfig hqs_config(const HqsFlags& h) {
    HqsConfig cfg;
    cfg.lambda = h.lambda;
    cfg.gamma = {h.gamma};
    cfg.beta1 = h.beta1;
    cfg.beta2 = h.beta2;
    cfg.outer_iters = h.outer;
    cfg.cg_max_iters = h.cg_iters;
    cfg.cg_tol = h.cg_tol;
    return cfg;
}

FilterSpec filter_spec(const HqsFlags& h) {
    return {h.filter == "hann" ? FilterKind::hann : FilterKind::ram_lak, h.cutoff};
}

void maybe_write_metrics(const std::string& csv, const std::string& run_id,
                         const std::string& method, int alpha_max, const Image& recon,
                         const std::string& gt_path, double seconds) {
    if (csv.empty() || gt_path.empty()) return;
    Image gt = read_image(gt_path);
    MetricReport r = evaluate(recon, gt);
    append_line(csv, metric_csv_header(),
                metric_csv_row(run_id, method, alpha_max, r, seconds));
    std::cout << metric_csv_row(run_id, method, alpha_max, r, seconds) << "\n";
}

// Config keys live in cosmetic [geometry]/[hqs]/[run] sections but all map
// onto the subcommand's flags. Unknown keys are rejected, flags given on the
// command line win.
void merge_config(CLI::App* cmd, const std::string& path) {
    auto cfg = parse_config_file(path);
    static const char* sections[] = {"geometry", "hqs", "run"};
    for (const auto& [key, value] : cfg) {
        size_t dotpos = key.find('.');
        std::string section = dotpos == std::string::npos ? "" : key.substr(0, dotpos);
        bool section_ok = false;
        for (const char* s : sections) section_ok = section_ok || section == s;
        if (!section_ok) throw parameter_error("config: unknown section in key '" + key + "'");
        std::string flag = "--" + key.substr(dotpos + 1);
        CLI::Option* opt = cmd->get_option_no_throw(flag);
        if (opt == nullptr) throw parameter_error("config: unknown key '" + key + "'");
        if (opt->count() == 0) {
            opt->add_result(value);
            opt->run_callback();
        }
    }
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"limited-angle CT reconstruction toolkit"};
    app.require_subcommand(1);

    // ---- phantom ----
    auto* phantom = app.add_subcommand("phantom", "generate a phantom image");
    std::string ph_kind = "shepp-logan", ph_out, ph_pgm;
    int ph_size = 128, ph_count = 1;
    double ph_shift = 0.0;
    uint64_t ph_seed = 0;
    phantom->add_option("--kind", ph_kind, "phantom family")
        ->check(CLI::IsMember({"shepp-logan", "random-ellipses"}))
        ->capture_default_str();
    phantom->add_option("--size", ph_size, "image side length")->capture_default_str();
    phantom->add_option("--seed", ph_seed, "rng seed")->required();
    phantom->add_option("--count", ph_count, "number of phantoms")->capture_default_str();
    phantom->add_option("--intensity-shift", ph_shift, "additive offset")->capture_default_str();
    phantom->add_option("-o,--out", ph_out, "output .lact path")->required();
    phantom->add_option("--pgm", ph_pgm, "optional preview image");

    // ---- project ----
    auto* project = app.add_subcommand("project", "forward-project an image");
    GeomFlags pg;
    add_geometry_flags(project, pg, 0, 0);
    std::string p_in, p_out;
    bool p_noise = false, p_measured_only = false;
    double p_gfrac = 0.05, p_i0 = 5e6;
    uint64_t p_seed = 0;
    project->add_option("-i,--image", p_in, "input image .lact")->required();
    project->add_option("-o,--out", p_out, "output sinogram .lact")->required();
    project->add_flag("--noise", p_noise, "apply the mixed noise model");
    project->add_option("--gaussian-frac", p_gfrac, "gaussian std as fraction of mean |y|")
        ->capture_default_str();
    project->add_option("--i0", p_i0, "incident photon count")->capture_default_str();
    auto* p_seed_opt = project->add_option("--seed", p_seed, "noise seed (required with --noise)");
    project->add_flag("--measured-only", p_measured_only,
                      "select the measured rows after noising the extended sinogram");

    // ---- fbp ----
    auto* fbp_cmd = app.add_subcommand("fbp", "filtered backprojection");
    GeomFlags fg;
    add_geometry_flags(fbp_cmd, fg, 0, 0);
    HqsFlags fh;
    std::string f_in, f_out, f_gt, f_csv, f_run = "run", f_pgm;
    fbp_cmd->add_option("-i,--sino", f_in, "input sinogram .lact")->required();
    fbp_cmd->add_option("-o,--out", f_out, "output image .lact")->required();
    fbp_cmd->add_option("--filter", fh.filter)->check(CLI::IsMember({"ram-lak", "hann"}))
        ->capture_default_str();
    fbp_cmd->add_option("--cutoff", fh.cutoff)->capture_default_str();
    fbp_cmd->add_option("--gt", f_gt, "ground-truth image for metrics");
    fbp_cmd->add_option("--metrics-csv", f_csv, "append a metrics row here");
    fbp_cmd->add_option("--run-id", f_run)->capture_default_str();
    fbp_cmd->add_option("--pgm", f_pgm, "preview grid output");

    // ---- hqscg ----
    auto* hq = app.add_subcommand("hqscg", "iterative reconstruction");
    GeomFlags hg;
    add_geometry_flags(hq, hg, 15, 15);
    HqsFlags hh;
    add_hqs_flags(hq, hh);
    std::string h_in, h_out, h_gt, h_csv, h_run = "run", h_pgm, h_obj, h_config;
    hq->add_option("-i,--sino", h_in, "measured sinogram .lact")->required();
    hq->add_option("-o,--out", h_out, "output image .lact")->required();
    hq->add_option("--gt", h_gt, "ground-truth image for metrics");
    hq->add_option("--metrics-csv", h_csv);
    hq->add_option("--run-id", h_run)->capture_default_str();
    hq->add_option("--pgm", h_pgm);
    hq->add_option("--objective-csv", h_obj, "write the objective trace");
    hq->add_option("--config", h_config, "key=value config file with [geometry]/[hqs] sections");

    // ---- train ----
    auto* tr = app.add_subcommand("train", "train the extrapolation network");
    GeomFlags tg;
    tg.size = 64;
    tg.detectors = 96;
    add_geometry_flags(tr, tg, 15, 15);
    HqsFlags th;
    th.cg_iters = 8;
    add_hqs_flags(tr, th);
    int t_items = 32, t_steps = 200, t_pretrain = 0, t_hidden = 16;
    double t_lr = 1e-4, t_mu = 0.1, t_gfrac = 0.05, t_i0 = 5e6;
    bool t_freeze = false, t_identity = false, t_nonoise = false;
    uint64_t t_seed = 0;
    std::string t_ckpt, t_curve, t_dump, t_kind = "random-ellipses", t_config;
    tr->add_option("--n-items", t_items, "training set size")->capture_default_str();
    tr->add_option("--steps", t_steps, "adam steps")->capture_default_str();
    tr->add_option("--lr", t_lr, "learning rate")->capture_default_str();
    tr->add_option("--mu", t_mu, "ssim loss weight")->capture_default_str();
    tr->add_option("--hidden", t_hidden, "hidden channels")->capture_default_str();
    tr->add_option("--pretrain-epl", t_pretrain, "extrapolation-only pretraining steps")
        ->capture_default_str();
    tr->add_flag("--freeze-epl", t_freeze, "freeze extrapolation parameters");
    tr->add_flag("--identity-init", t_identity, "zero final layers (plain-solver start)");
    tr->add_flag("--no-noise", t_nonoise, "train on clean sinograms");
    tr->add_option("--phantom-kind", t_kind)->check(CLI::IsMember({"shepp-logan", "random-ellipses"}))
        ->capture_default_str();
    tr->add_option("--gaussian-frac", t_gfrac)->capture_default_str();
    tr->add_option("--i0", t_i0)->capture_default_str();
    tr->add_option("--seed", t_seed, "training seed")->required();
    tr->add_option("--ckpt-out", t_ckpt, "checkpoint output path")->required();
    tr->add_option("--loss-csv", t_curve, "loss curve output");
    tr->add_option("--dump-dataset", t_dump, "write dataset items under this directory");
    tr->add_option("--config", t_config, "config file");

    // ---- epnet ----
    auto* ep = app.add_subcommand("epnet", "reconstruct with a trained network");
    GeomFlags eg;
    add_geometry_flags(ep, eg, 15, 15);
    HqsFlags eh;
    eh.cg_iters = 8;
    add_hqs_flags(ep, eh);
    int e_hidden = 16;
    std::string e_ckpt, e_in, e_out, e_gt, e_csv, e_run = "run", e_pgm, e_config;
    ep->add_option("--ckpt", e_ckpt, "checkpoint path")->required();
    ep->add_option("-i,--sino", e_in, "measured sinogram .lact")->required();
    ep->add_option("-o,--out", e_out, "output image .lact")->required();
    ep->add_option("--hidden", e_hidden)->capture_default_str();
    ep->add_option("--gt", e_gt);
    ep->add_option("--metrics-csv", e_csv);
    ep->add_option("--run-id", e_run)->capture_default_str();
    ep->add_option("--pgm", e_pgm);
    ep->add_option("--config", e_config, "config file");

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "compute metrics for a reconstruction");
    std::string v_recon, v_gt, v_csv, v_run = "run", v_method = "unknown";
    int v_alpha = 90;
    double v_seconds = 0.0;
    ev->add_option("--recon", v_recon)->required();
    ev->add_option("--gt", v_gt)->required();
    ev->add_option("--csv", v_csv, "metrics csv to append to")->required();
    ev->add_option("--run-id", v_run)->capture_default_str();
    ev->add_option("--method", v_method)->capture_default_str();
    ev->add_option("--alpha-max", v_alpha)->capture_default_str();
    ev->add_option("--seconds", v_seconds)->capture_default_str();

    // ---- shift-test ----
    auto* sh = app.add_subcommand("shift-test", "evaluate a model on intensity-shifted phantoms");
    GeomFlags sg;
    sg.size = 64;
    sg.detectors = 96;
    add_geometry_flags(sh, sg, 15, 15);
    HqsFlags shh;
    shh.cg_iters = 8;
    add_hqs_flags(sh, shh);
    int s_items = 4, s_hidden = 16;
    double s_shift = 0.2, s_gfrac = 0.05, s_i0 = 5e6;
    uint64_t s_seed = 0;
    std::string s_ckpt, s_csv, s_kind = "random-ellipses";
    sh->add_option("--ckpt", s_ckpt)->required();
    sh->add_option("--shift", s_shift, "intensity shift added to test phantoms")
        ->capture_default_str();
    sh->add_option("--n-items", s_items)->capture_default_str();
    sh->add_option("--hidden", s_hidden)->capture_default_str();
    sh->add_option("--seed", s_seed, "test-set seed")->required();
    sh->add_option("--csv", s_csv, "psnr report csv");
    sh->add_option("--phantom-kind", s_kind)
        ->check(CLI::IsMember({"shepp-logan", "random-ellipses"}))
        ->capture_default_str();
    sh->add_option("--gaussian-frac", s_gfrac)->capture_default_str();
    sh->add_option("--i0", s_i0)->capture_default_str();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    Stage stage;
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("phantom")) {
            stage = {"phantom generation"};
            PhantomSpec spec;
            spec.kind = ph_kind == "random-ellipses" ? PhantomKind::random_ellipses
                                                     : PhantomKind::shepp_logan;
            spec.size = ph_size;
            spec.seed = ph_seed;
            spec.count = ph_count;
            spec.intensity_shift = ph_shift;
            spec.validate();
            for (int i = 0; i < spec.count; ++i) {
                PhantomSpec s = spec;
                s.seed = spec.count == 1 ? spec.seed : mix_seed(spec.seed, i);
                Image u = make_phantom(s);
                std::string path = ph_out;
                if (spec.count > 1) path = ph_out + "." + std::to_string(i);
                stage = {"writing " + path};
                write_image(path, u);
                if (!ph_pgm.empty() && i == 0) write_pgm_grid(ph_pgm, {u});
            }
            return 0;
        }

        if (app.got_subcommand("project")) {
            if (p_noise && p_seed_opt->count() == 0)
                throw parameter_error("project: --seed is required with --noise");
            stage = {"reading " + p_in};
            Image u = read_image(p_in);
            pg.size = u.height;
            if (u.height != u.width) throw dimension_error("project: image must be square");
            ScanGeometry g_meas = measured_geometry(pg, false);
            ScanGeometry g = extend_geometry(g_meas, pg.extrap_left, pg.extrap_right);
            stage = {"projecting"};
            Sinogram y = forward_project(u, g);
            if (p_noise) {
                stage = {"adding noise"};
                NoiseModel nm{p_gfrac, p_i0, p_seed};
                y = add_noise(y, nm);
            }
            if (p_measured_only) {
                AngleSelector sel = AngleSelector::contiguous(pg.extrap_left, pg.alpha_max);
                y = select_views(y, sel);
            }
            stage = {"writing " + p_out};
            write_sinogram(p_out, y);
            return 0;
        }

        if (app.got_subcommand("fbp")) {
            stage = {"reading " + f_in};
            ScanGeometry g = extend_geometry(measured_geometry(fg, false), fg.extrap_left,
                                             fg.extrap_right);
            Sinogram y = read_sinogram(f_in, g);
            stage = {"fbp reconstruction"};
            auto start = std::chrono::steady_clock::now();
            Image recon = fbp_reconstruct(y, g, filter_spec(fh));
            double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                              .count();
            stage = {"writing " + f_out};
            write_image(f_out, recon);
            if (!f_pgm.empty()) write_pgm_grid(f_pgm, {recon});
            stage = {"metrics"};
            maybe_write_metrics(f_csv, f_run, "fbp", fg.alpha_max, recon, f_gt, secs);
            return 0;
        }

        if (app.got_subcommand("hqscg")) {
            if (!h_config.empty()) merge_config(hq, h_config);
            stage = {"reading " + h_in};
            ScanGeometry g_meas = measured_geometry(hg, false);
            ScanGeometry g_ext = extend_geometry(g_meas, hg.extrap_left, hg.extrap_right);
            AngleSelector sel = AngleSelector::contiguous(hg.extrap_left, hg.alpha_max);
            Sinogram y = read_sinogram(h_in, g_meas);
            stage = {"hqs-cg reconstruction"};
            HqsConfig cfg = hqs_config(hh);
            FrameTransform ft{hh.levels};
            auto start = std::chrono::steady_clock::now();
            auto [recon, state] = hqs_cg_run(y, g_meas, g_ext, sel, cfg, ft, filter_spec(hh));
            double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                              .count();
            stage = {"writing " + h_out};
            write_image(h_out, recon);
            if (!h_obj.empty()) {
                std::ostringstream os;
                os.precision(12);
                os << "iteration,objective\n";
                for (size_t i = 0; i < state.objective_history.size(); ++i)
                    os << i << "," << state.objective_history[i] << "\n";
                write_text_atomic(h_obj, os.str());
            }
            if (!h_pgm.empty()) write_pgm_grid(h_pgm, {state.u});
            stage = {"metrics"};
            maybe_write_metrics(h_csv, h_run, "hqscg", hg.alpha_max, recon, h_gt, secs);
            return 0;
        }

        if (app.got_subcommand("train")) {
            if (!t_config.empty()) merge_config(tr, t_config);
            stage = {"building dataset"};
            tg.pixel_spacing = default_pixel_spacing(tg, true);
            ScanGeometry g_meas = measured_geometry(tg, true);
            ScanGeometry g_ext = extend_geometry(g_meas, tg.extrap_left, tg.extrap_right);
            AngleSelector sel = AngleSelector::contiguous(tg.extrap_left, tg.alpha_max);
            PhantomSpec spec;
            spec.kind = t_kind == "shepp-logan" ? PhantomKind::shepp_logan
                                                : PhantomKind::random_ellipses;
            spec.size = tg.size;
            spec.seed = t_seed;
            spec.count = t_items;
            NoiseModel nm{t_nonoise ? 0.0 : t_gfrac, t_nonoise ? 1e18 : t_i0, mix_seed(t_seed, 7)};
            auto dataset = make_dataset(t_items, spec, g_ext, sel, nm);
            if (!t_dump.empty()) {
                stage = {"dumping dataset"};
                for (size_t i = 0; i < dataset.size(); ++i) {
                    std::ostringstream base;
                    base << t_dump << "/item_" << i;
                    write_image(base.str() + "_gt.lact", dataset[i].gt);
                    write_sinogram(base.str() + "_meas.lact", dataset[i].measured);
                    write_sinogram(base.str() + "_sino_gt.lact", dataset[i].extended_gt);
                }
            }
            stage = {"training"};
            nn::EpnetConfig ecfg;
            ecfg.n_left = tg.extrap_left;
            ecfg.n_right = tg.extrap_right;
            ecfg.hidden = t_hidden;
            ecfg.hqs = hqs_config(th);
            ecfg.hqs.record_objective = false;
            ecfg.frame = FrameTransform{th.levels};
            ecfg.ril_filter = filter_spec(th);
            ecfg.loss_w.mu = t_mu;
            ecfg.identity_init = t_identity;
            ecfg.freeze_epl = t_freeze;
            ecfg.seed = t_seed;
            nn::EpnetModel model = nn::EpnetModel::build(ecfg);
            nn::AdamParams adam;
            adam.lr = t_lr;
            auto result =
                nn::epnet_train(model, dataset, g_meas, g_ext, sel, t_steps, adam, t_pretrain);
            stage = {"writing " + t_ckpt};
            checkpoint_save(t_ckpt, model.params);
            if (!t_curve.empty()) {
                std::ostringstream os;
                os.precision(12);
                os << "step,loss\n";
                for (size_t i = 0; i < result.pretrain_curve.size(); ++i)
                    os << "pre" << i << "," << result.pretrain_curve[i] << "\n";
                for (size_t i = 0; i < result.loss_curve.size(); ++i)
                    os << i << "," << result.loss_curve[i] << "\n";
                write_text_atomic(t_curve, os.str());
            }
            std::cout << "initial mean loss " << result.initial_mean_loss << "\n"
                      << "final mean loss   " << result.final_mean_loss << "\n";
            return 0;
        }

        if (app.got_subcommand("epnet")) {
            if (!e_config.empty()) merge_config(ep, e_config);
            stage = {"reading " + e_in};
            eg.pixel_spacing = default_pixel_spacing(eg, true);
            ScanGeometry g_meas = measured_geometry(eg, true);
            ScanGeometry g_ext = extend_geometry(g_meas, eg.extrap_left, eg.extrap_right);
            AngleSelector sel = AngleSelector::contiguous(eg.extrap_left, eg.alpha_max);
            Sinogram y = read_sinogram(e_in, g_meas);
            stage = {"building model"};
            nn::EpnetConfig ecfg;
            ecfg.n_left = eg.extrap_left;
            ecfg.n_right = eg.extrap_right;
            ecfg.hidden = e_hidden;
            ecfg.hqs = hqs_config(eh);
            ecfg.hqs.record_objective = false;
            ecfg.frame = FrameTransform{eh.levels};
            ecfg.ril_filter = filter_spec(eh);
            nn::EpnetModel model = nn::EpnetModel::build(ecfg);
            stage = {"loading " + e_ckpt};
            checkpoint_load(e_ckpt, model.params);
            stage = {"epnet reconstruction"};
            auto start = std::chrono::steady_clock::now();
            nn::Tape t(&model.params);
            nn::EpnetForward f = nn::epnet_forward(t, model, y, g_meas, g_ext, sel, nullptr);
            double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                              .count();
            stage = {"writing " + e_out};
            write_image(e_out, f.recon);
            if (!e_pgm.empty()) write_pgm_grid(e_pgm, {f.u0, f.sino_branch, f.recon});
            stage = {"metrics"};
            maybe_write_metrics(e_csv, e_run, "epnet", eg.alpha_max, f.recon, e_gt, secs);
            return 0;
        }

        if (app.got_subcommand("eval")) {
            stage = {"reading inputs"};
            Image recon = read_image(v_recon);
            Image gt = read_image(v_gt);
            stage = {"metrics"};
            MetricReport r = evaluate(recon, gt);
            append_line(v_csv, metric_csv_header(),
                        metric_csv_row(v_run, v_method, v_alpha, r, v_seconds));
            std::cout << metric_csv_row(v_run, v_method, v_alpha, r, v_seconds) << "\n";
            return 0;
        }

        if (app.got_subcommand("shift-test")) {
            stage = {"building model"};
            sg.pixel_spacing = default_pixel_spacing(sg, true);
            ScanGeometry g_meas = measured_geometry(sg, true);
            ScanGeometry g_ext = extend_geometry(g_meas, sg.extrap_left, sg.extrap_right);
            AngleSelector sel = AngleSelector::contiguous(sg.extrap_left, sg.alpha_max);
            nn::EpnetConfig ecfg;
            ecfg.n_left = sg.extrap_left;
            ecfg.n_right = sg.extrap_right;
            ecfg.hidden = s_hidden;
            ecfg.hqs = hqs_config(shh);
            ecfg.hqs.record_objective = false;
            ecfg.frame = FrameTransform{shh.levels};
            ecfg.ril_filter = filter_spec(shh);
            nn::EpnetModel model = nn::EpnetModel::build(ecfg);
            checkpoint_load(s_ckpt, model.params);

            PhantomSpec spec;
            spec.kind = s_kind == "shepp-logan" ? PhantomKind::shepp_logan
                                                : PhantomKind::random_ellipses;
            spec.size = sg.size;
            spec.seed = s_seed;
            NoiseModel nm{s_gfrac, s_i0, mix_seed(s_seed, 13)};
            HqsConfig plain_cfg = hqs_config(shh);
            FrameTransform ft{shh.levels};

            struct Acc {
                double fbp = 0.0, hqs = 0.0, ep = 0.0;
            };
            auto eval_set = [&](double shift) {
                stage = {"evaluating shift " + std::to_string(shift)};
                PhantomSpec s2 = spec;
                s2.intensity_shift = shift;
                auto items = make_dataset(s_items, s2, g_ext, sel, nm);
                Acc a;
                for (const auto& item : items) {
                    Image fb = fbp_reconstruct(item.measured, g_meas, ecfg.ril_filter);
                    auto [hr, st] = hqs_cg_run(item.measured, g_meas, g_ext, sel, plain_cfg, ft,
                                               ecfg.ril_filter);
                    nn::Tape t(&model.params);
                    nn::EpnetForward f =
                        nn::epnet_forward(t, model, item.measured, g_meas, g_ext, sel, nullptr);
                    a.fbp += evaluate(fb, item.gt).psnr_db;
                    a.hqs += evaluate(hr, item.gt).psnr_db;
                    a.ep += evaluate(f.recon, item.gt).psnr_db;
                }
                a.fbp /= s_items;
                a.hqs /= s_items;
                a.ep /= s_items;
                return a;
            };
            Acc base = eval_set(0.0);
            Acc shifted = eval_set(s_shift);
            std::ostringstream os;
            os.precision(6);
            os << "method,psnr_unshifted,psnr_shifted,delta\n";
            os << "fbp," << base.fbp << "," << shifted.fbp << "," << shifted.fbp - base.fbp
               << "\n";
            os << "hqscg," << base.hqs << "," << shifted.hqs << "," << shifted.hqs - base.hqs
               << "\n";
            os << "epnet," << base.ep << "," << shifted.ep << "," << shifted.ep - base.ep << "\n";
            std::cout << os.str();
            if (!s_csv.empty()) write_text_atomic(s_csv, os.str());
            return 0;
        }

        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const lact::error& e) {
        std::cerr << "error in " << stage.name << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error in " << stage.name << ": " << e.what() << "\n";
        return 1;
    }
}

}  // namespace lact::cli
