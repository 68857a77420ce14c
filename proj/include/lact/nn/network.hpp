#pragma once

#include <string>
#include <vector>

#include "lact/nn/tape.hpp"

namespace lact::nn {

enum class LayerKind { conv, relu, pool2, up2, save_skip, cat_skip, add_source };

struct LayerSpec {
    LayerKind kind = LayerKind::conv;
    int in_ch = 0, out_ch = 0, k = 3;  // conv only
    bool zero_init = false;            // zeroed in identity mode (final layers)
};

// A small interpreted layer stack: convs, rectifiers, down/upsampling and
// skip wiring (save_skip pushes the running feature map, cat_skip pops and
// concatenates it, add_source adds the network input back).
struct NetworkSpec {
    std::string name;
    std::vector<LayerSpec> layers;
    bool frozen = false;

    // walks the layer list and checks channel bookkeeping; returns the
    // output channel count for the given input width
    int validate(int in_ch) const;
    std::string param_name(int layer_idx, bool bias) const;
};

// He-normal conv weights (zeroed final layers in identity mode), zero biases.
void init_network_params(const NetworkSpec& spec, ParamStore& store, Rng& rng,
                         bool identity_mode);

NodeId run_network(Tape& t, const NetworkSpec& spec, NodeId input);

// plain conv stack: in -> hidden (x n_hidden, relu) -> out
NetworkSpec make_conv_stack(const std::string& name, int in_ch, int hidden, int n_hidden,
                            int out_ch, bool residual);
// three-branch extrapolation stacks and the enhancement net are residual
// 3-layer stacks; the initializer is a 2-level encoder-decoder with one skip
NetworkSpec make_epl_branch(const std::string& name, int hidden, bool residual_middle);
NetworkSpec make_senet(const std::string& name, int hidden);
NetworkSpec make_initcnn(const std::string& name, int hidden);

}  // namespace lact::nn
