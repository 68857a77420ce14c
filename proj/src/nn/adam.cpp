#include "lact/nn/adam.hpp"

#include <cmath>

namespace lact::nn {

void AdamParams::validate() const {
    if (!(lr > 0.0)) throw parameter_error("adam: learning rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
        throw parameter_error("adam: betas must be in [0,1)");
    if (!(eps > 0.0)) throw parameter_error("adam: eps must be > 0");
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamParams& p) {
    p.validate();
    if (!param.same_shape(grad)) throw dimension_error("adam: gradient shape mismatch");
    if (state.m.v.empty()) {
        state.m = Tensor(param.ch, param.h, param.w, 0.0);
        state.v = Tensor(param.ch, param.h, param.w, 0.0);
    }
    if (!state.m.same_shape(param)) throw dimension_error("adam: state shape mismatch");
    state.t += 1;
    double bc1 = 1.0 - std::pow(p.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(p.beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < param.v.size(); ++i) {
        double g = grad.v[i];
        state.m.v[i] = p.beta1 * state.m.v[i] + (1.0 - p.beta1) * g;
        state.v.v[i] = p.beta2 * state.v.v[i] + (1.0 - p.beta2) * g * g;
        double mhat = state.m.v[i] / bc1;
        double vhat = state.v.v[i] / bc2;
        param.v[i] -= p.lr * mhat / (std::sqrt(vhat) + p.eps);
    }
}

void adam_step_entry(ParamStore& store, const std::string& name, AdamState& state,
                     const AdamParams& p) {
    ParamStore::Entry& e = store.at(name);
    if (e.frozen) throw parameter_error("adam: parameter " + name + " is frozen");
    if (e.grad.v.empty()) throw parameter_error("adam: parameter " + name + " has no gradient");
    adam_step(e.value, e.grad, state, p);
}

void AdamOptimizer::step(ParamStore& store) {
    states.resize(store.entries.size());
    for (size_t i = 0; i < store.entries.size(); ++i) {
        ParamStore::Entry& e = store.entries[i];
        if (e.frozen || e.grad.v.empty()) continue;
        adam_step(e.value, e.grad, states[i], params);
    }
}

}  // namespace lact::nn
