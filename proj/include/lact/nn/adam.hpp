#pragma once

#include "lact/nn/tape.hpp"

namespace lact::nn {

struct AdamParams {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

struct AdamState {
    Tensor m, v;
    int64_t t = 0;
};

// Bias-corrected Adam update on one parameter tensor.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamParams& p);

// Store-level single-entry update; rejects frozen parameters.
void adam_step_entry(ParamStore& store, const std::string& name, AdamState& state,
                     const AdamParams& p);

// Per-entry Adam over a parameter store; frozen entries are skipped, entries
// without gradients are left untouched.
struct AdamOptimizer {
    AdamParams params;
    std::vector<AdamState> states;

    void step(ParamStore& store);
};

}  // namespace lact::nn
