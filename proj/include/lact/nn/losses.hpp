#pragma once

#include <vector>

#include "lact/nn/tape.hpp"

namespace lact::nn {

// 1 on extrapolated rows, 0 on measured rows of the extended sinogram.
struct ExtrapolationMask {
    int views = 0, bins = 0;
    std::vector<double> m;

    static ExtrapolationMask from_selector(const AngleSelector& sel, const ScanGeometry& g_ext);
    void validate(const ScanGeometry& g_ext) const;
    Tensor one_plus() const;  // (1 + mask) as a 1xVxD weight tensor
};

struct LossWeights {
    double mu = 0.1;  // SSIM loss weight

    void validate() const;
};

struct MsSsimSpec {
    int levels = 5;
    int ksize = 11;
    double sigma = 1.5;
    double data_range = 1.0;
    double k1 = 0.01;
    double k2 = 0.03;

    void validate() const;
    // largest level count usable for an h x w image (downsampling floor)
    static int max_levels_for(int h, int w, int ksize = 11);
};

NodeId ms_ssim_node(Tape& t, NodeId a, NodeId b, const MsSsimSpec& spec);
double ms_ssim(const Image& a, const Image& b, const MsSsimSpec& spec);

// (1+mask)-weighted L1 between sinograms plus L1 between their filtered
// backprojections.
NodeId loss_epl_node(Tape& t, NodeId y_out, const Sinogram& y_gt, const ExtrapolationMask& mask,
                     const ScanGeometry& g_ext, const FilterSpec& f);
double loss_epl(const Sinogram& y_out, const Sinogram& y_gt, const ExtrapolationMask& mask,
                const FilterSpec& f);

// sinogram L1 plus image-domain L1 through the reconstruction operator
NodeId loss_se_node(Tape& t, NodeId y_se, const Sinogram& y_gt, const Image& u_gt,
                    const ScanGeometry& g_ext, const FilterSpec& f);
double loss_se(const Sinogram& y_se, const Sinogram& y_gt, const Image& u_gt,
               const FilterSpec& f);

// sum_i |u_i - u_gt|_2 + mu * (1 - msssim(u_N, u_gt)) + epl + se terms
NodeId total_loss_node(Tape& t, const std::vector<NodeId>& iterates, const Image& u_gt,
                       NodeId y_out, NodeId y_se, const Sinogram& y_gt,
                       const ExtrapolationMask& mask, const ScanGeometry& g_ext,
                       const FilterSpec& f, const LossWeights& w, const MsSsimSpec& ssim);
double total_loss(const std::vector<Image>& iterates, const Image& u_gt, const Sinogram& y_out,
                  const Sinogram& y_se, const Sinogram& y_gt, const ExtrapolationMask& mask,
                  const FilterSpec& f, const LossWeights& w, const MsSsimSpec& ssim);

}  // namespace lact::nn
