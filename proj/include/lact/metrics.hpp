#pragma once

#include <string>

#include "lact/core.hpp"

namespace lact {

struct MetricReport {
    double psnr_db = 0.0;
    bool psnr_infinite = false;
    double ms_ssim = 0.0;
    double data_range = 0.0;
};

// 10 log10(range^2 / MSE); +inf for identical images.
double psnr(const Image& a, const Image& b, double data_range);

// PSNR and MS-SSIM (kernel 11, sigma 1.5, up to 5 levels as the image size
// allows) with data_range taken from the ground truth.
MetricReport evaluate(const Image& recon, const Image& gt);

// run_id,method,alpha_max,psnr_db,ms_ssim,seconds
std::string metric_csv_header();
std::string metric_csv_row(const std::string& run_id, const std::string& method, int alpha_max,
                           const MetricReport& r, double seconds);

}  // namespace lact
