#include "lact/nn/network.hpp"

#include <cmath>

namespace lact::nn {

int NetworkSpec::validate(int in_ch) const {
    int cur = in_ch;
    std::vector<int> skips;
    for (const LayerSpec& l : layers) {
        switch (l.kind) {
            case LayerKind::conv:
                if (l.in_ch != cur)
                    throw dimension_error("network " + name + ": conv expects " +
                                          std::to_string(l.in_ch) + " channels, got " +
                                          std::to_string(cur));
                if (l.k % 2 == 0 || l.k < 1)
                    throw parameter_error("network " + name + ": kernel size must be odd");
                cur = l.out_ch;
                break;
            case LayerKind::relu:
            case LayerKind::pool2:
            case LayerKind::up2:
                break;
            case LayerKind::save_skip:
                skips.push_back(cur);
                break;
            case LayerKind::cat_skip:
                if (skips.empty())
                    throw parameter_error("network " + name + ": cat_skip without save_skip");
                cur += skips.back();
                skips.pop_back();
                break;
            case LayerKind::add_source:
                if (cur != in_ch)
                    throw dimension_error("network " + name +
                                          ": add_source needs output channels == input channels");
                break;
        }
    }
    if (!skips.empty()) throw parameter_error("network " + name + ": unconsumed skip");
    return cur;
}

std::string NetworkSpec::param_name(int layer_idx, bool bias) const {
    return name + ".conv" + std::to_string(layer_idx) + (bias ? ".b" : ".w");
}

void init_network_params(const NetworkSpec& spec, ParamStore& store, Rng& rng,
                         bool identity_mode) {
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (l.kind != LayerKind::conv) continue;
        Tensor w(l.out_ch, l.in_ch * l.k, l.k, 0.0);
        if (!(identity_mode && l.zero_init)) {
            double std = std::sqrt(2.0 / (l.in_ch * l.k * l.k));
            for (double& x : w.v) x = std * rng.normal();
        }
        store.add(spec.param_name(static_cast<int>(i), false), std::move(w), spec.frozen);
        store.add(spec.param_name(static_cast<int>(i), true), Tensor(l.out_ch, 1, 1, 0.0),
                  spec.frozen);
    }
}

NodeId run_network(Tape& t, const NetworkSpec& spec, NodeId input) {
    spec.validate(t.val(input).ch);
    NodeId cur = input;
    std::vector<NodeId> skips;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        switch (l.kind) {
            case LayerKind::conv:
                cur = t.conv2d(cur, t.param(spec.param_name(static_cast<int>(i), false)),
                               t.param(spec.param_name(static_cast<int>(i), true)));
                break;
            case LayerKind::relu:
                cur = t.relu(cur);
                break;
            case LayerKind::pool2:
                cur = t.avgpool2(cur);
                break;
            case LayerKind::up2:
                cur = t.upsample2(cur);
                break;
            case LayerKind::save_skip:
                skips.push_back(cur);
                break;
            case LayerKind::cat_skip:
                cur = t.concat_ch(cur, skips.back());
                skips.pop_back();
                break;
            case LayerKind::add_source:
                cur = t.add(cur, input);
                break;
        }
    }
    return cur;
}

NetworkSpec make_conv_stack(const std::string& name, int in_ch, int hidden, int n_hidden,
                            int out_ch, bool residual) {
    NetworkSpec s;
    s.name = name;
    int cur = in_ch;
    for (int i = 0; i < n_hidden; ++i) {
        s.layers.push_back({LayerKind::conv, cur, hidden, 3, false});
        s.layers.push_back({LayerKind::relu});
        cur = hidden;
    }
    s.layers.push_back({LayerKind::conv, cur, out_ch, 3, true});
    if (residual) s.layers.push_back({LayerKind::add_source});
    return s;
}

NetworkSpec make_epl_branch(const std::string& name, int hidden, bool residual_middle) {
    return make_conv_stack(name, 1, hidden, 2, 1, residual_middle);
}

NetworkSpec make_senet(const std::string& name, int hidden) {
    return make_conv_stack(name, 1, hidden, 2, 1, true);
}

NetworkSpec make_initcnn(const std::string& name, int hidden) {
    NetworkSpec s;
    s.name = name;
    int h2 = 2 * hidden;
    s.layers = {
        {LayerKind::conv, 2, hidden, 3, false},
        {LayerKind::relu},
        {LayerKind::conv, hidden, hidden, 3, false},
        {LayerKind::relu},
        {LayerKind::save_skip},
        {LayerKind::pool2},
        {LayerKind::conv, hidden, h2, 3, false},
        {LayerKind::relu},
        {LayerKind::conv, h2, h2, 3, false},
        {LayerKind::relu},
        {LayerKind::up2},
        {LayerKind::cat_skip},
        {LayerKind::conv, h2 + hidden, hidden, 3, false},
        {LayerKind::relu},
        {LayerKind::conv, hidden, 1, 3, true},
    };
    return s;
}

}  // namespace lact::nn
