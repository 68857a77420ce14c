#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lact/fbp.hpp"
#include "lact/framelet.hpp"
#include "lact/geometry.hpp"
#include "lact/nn/tensor.hpp"

namespace lact::nn {

using NodeId = int32_t;

struct ParamStore {
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;  // empty until a backward pass touches it
        bool frozen = false;
    };
    std::vector<Entry> entries;
    std::unordered_map<std::string, int> index;

    int add(const std::string& name, Tensor init, bool frozen = false);
    int find(const std::string& name) const;  // -1 when absent
    Entry& at(const std::string& name);
    const Entry& at(const std::string& name) const;
    void zero_grads();
};

// Plain dense convolution kernels (cross-correlation, zero padding, odd
// kernel). Weights are laid out as (C_out, C_in*k, k), bias as (C_out,1,1).
Tensor conv2d_forward(const Tensor& x, const Tensor& weights, const Tensor& bias);
void conv2d_backward(const Tensor& x, const Tensor& weights, const Tensor& grad_out,
                     Tensor& grad_x, Tensor& grad_w, Tensor& grad_b);

// Eager reverse-mode tape. Nodes are created in topological order, values are
// computed immediately, and backward() runs the recorded closures in reverse.
class Tape {
  public:
    explicit Tape(ParamStore* params = nullptr) : params_(params) {}

    NodeId constant(Tensor v);
    NodeId input(Tensor v);                 // grad-tracked leaf
    NodeId param(const std::string& name);  // store-backed leaf, cached per tape

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    NodeId scale(NodeId x, double c);
    NodeId axpy(NodeId s, NodeId x, NodeId y);  // s*x + y, s scalar
    NodeId relu(NodeId x);
    // thr per channel; a negative entry passes that channel through untouched
    NodeId softshrink(NodeId x, std::vector<double> thr);
    NodeId chan_scale(NodeId x, std::vector<double> w);
    NodeId row_scale(NodeId x, std::vector<double> w);
    NodeId concat_ch(NodeId a, NodeId b);
    NodeId concat_rows(NodeId a, NodeId b);
    NodeId slice_rows(NodeId x, int r0, int r1);
    NodeId avgpool2(NodeId x);   // floor semantics on odd sizes
    NodeId upsample2(NodeId x);  // nearest neighbor
    NodeId conv2d(NodeId x, NodeId w, NodeId b);
    NodeId gauss_blur(NodeId x, const std::vector<double>& taps);  // separable, valid

    NodeId project(NodeId x, const ScanGeometry& g);
    NodeId backproject(NodeId y, const ScanGeometry& g);
    NodeId ril(NodeId y, const ScanGeometry& g, const FilterSpec& f);
    NodeId embed_rows(NodeId y, const AngleSelector& sel, const ScanGeometry& g_ext);
    NodeId decompose(NodeId x, const FrameTransform& ft);
    NodeId reconstruct(NodeId z, const FrameTransform& ft);

    NodeId dot(NodeId a, NodeId b);
    NodeId sum_abs(NodeId x);
    NodeId weighted_sum_abs(NodeId x, Tensor weights);
    NodeId mean(NodeId x);
    NodeId sqrt_s(NodeId s);
    NodeId powc(NodeId s, double e);  // clamps non-positive bases to 0

    const Tensor& val(NodeId id) const { return nodes_[id].val; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
    size_t n_nodes() const { return nodes_.size(); }
    bool tracked(NodeId id) const { return nodes_[id].track; }

    // Reverse-topological accumulation from a scalar node. Gradients of
    // store-backed parameters accumulate across uses and across tapes until
    // ParamStore::zero_grads.
    void backward(NodeId loss);

  private:
    struct Node {
        Tensor val;
        Tensor grad;
        bool track = false;
        std::function<void()> back;
    };

    NodeId push(Tensor val, bool track, std::function<void()> back = nullptr);
    void add_grad(NodeId id, const Tensor& g);
    Tensor& grad_buf(NodeId id) { return nodes_[id].grad; }
    void check_shape(NodeId a, NodeId b, const char* op) const;

    std::vector<Node> nodes_;
    ParamStore* params_ = nullptr;
    std::unordered_map<std::string, NodeId> param_nodes_;
};

}  // namespace lact::nn
