#include "lact/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lact/nn/losses.hpp"

namespace lact {

double psnr(const Image& a, const Image& b, double data_range) {
    if (!a.same_shape(b)) throw dimension_error("psnr: image shapes differ");
    if (!(data_range > 0.0)) throw parameter_error("psnr: data_range must be > 0");
    double mse = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / mse);
}

MetricReport evaluate(const Image& recon, const Image& gt) {
    if (!recon.same_shape(gt)) throw dimension_error("evaluate: image shapes differ");
    double lo = gt.data[0], hi = gt.data[0];
    for (double v : gt.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo)) throw parameter_error("evaluate: constant ground truth has zero data range");
    MetricReport r;
    r.data_range = hi - lo;
    double p = psnr(recon, gt, r.data_range);
    r.psnr_infinite = std::isinf(p);
    r.psnr_db = p;
    nn::MsSsimSpec spec;
    spec.data_range = r.data_range;
    spec.levels = nn::MsSsimSpec::max_levels_for(gt.height, gt.width);
    r.ms_ssim = nn::ms_ssim(recon, gt, spec);
    return r;
}

std::string metric_csv_header() { return "run_id,method,alpha_max,psnr_db,ms_ssim,seconds"; }

std::string metric_csv_row(const std::string& run_id, const std::string& method, int alpha_max,
                           const MetricReport& r, double seconds) {
    std::ostringstream os;
    os.precision(10);
    os << run_id << ',' << method << ',' << alpha_max << ',';
    if (r.psnr_infinite)
        os << "inf";
    else
        os << r.psnr_db;
    os << ',' << r.ms_ssim << ',' << seconds;
    return os.str();
}

}  // namespace lact
