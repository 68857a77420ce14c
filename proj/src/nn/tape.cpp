#include "lact/nn/tape.hpp"

#include <algorithm>
#include <cmath>

namespace lact::nn {

int ParamStore::add(const std::string& name, Tensor init, bool frozen) {
    if (index.count(name)) throw parameter_error("param store: duplicate name " + name);
    index[name] = static_cast<int>(entries.size());
    entries.push_back({name, std::move(init), Tensor{}, frozen});
    return index[name];
}

int ParamStore::find(const std::string& name) const {
    auto it = index.find(name);
    return it == index.end() ? -1 : it->second;
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
    int i = find(name);
    if (i < 0) throw parameter_error("param store: unknown parameter " + name);
    return entries[i];
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
    int i = find(name);
    if (i < 0) throw parameter_error("param store: unknown parameter " + name);
    return entries[i];
}

void ParamStore::zero_grads() {
    for (auto& e : entries) e.grad = Tensor{};
}

Tensor conv2d_forward(const Tensor& x, const Tensor& weights, const Tensor& bias) {
    int k = weights.w;
    if (k % 2 == 0) throw parameter_error("conv2d: kernel size must be odd");
    int cin = weights.h / k, cout = weights.ch;
    if (weights.h != cin * k) throw dimension_error("conv2d: weight layout mismatch");
    if (x.ch != cin) throw dimension_error("conv2d: input channel mismatch");
    if (bias.ch != cout || bias.h != 1 || bias.w != 1)
        throw dimension_error("conv2d: bias shape mismatch");
    int p = k / 2;
    Tensor out(cout, x.h, x.w);
    int chunks = std::min(cout, 8);
    parallel_chunks(chunks, [&](int chunk) {
        int block = (cout + chunks - 1) / chunks;
        for (int co = chunk * block; co < std::min(cout, (chunk + 1) * block); ++co)
            for (int r = 0; r < x.h; ++r)
                for (int c = 0; c < x.w; ++c) {
                    double acc = bias.v[co];
                    for (int ci = 0; ci < cin; ++ci)
                        for (int kr = 0; kr < k; ++kr) {
                            int rr = r + kr - p;
                            if (rr < 0 || rr >= x.h) continue;
                            for (int kc = 0; kc < k; ++kc) {
                                int cc = c + kc - p;
                                if (cc < 0 || cc >= x.w) continue;
                                acc += weights.at(co, ci * k + kr, kc) * x.at(ci, rr, cc);
                            }
                        }
                    out.at(co, r, c) = acc;
                }
    });
    return out;
}

void conv2d_backward(const Tensor& x, const Tensor& weights, const Tensor& grad_out,
                     Tensor& grad_x, Tensor& grad_w, Tensor& grad_b) {
    int k = weights.w;
    int cin = weights.h / k, cout = weights.ch;
    int p = k / 2;
    if (!grad_x.same_shape(x)) throw dimension_error("conv2d_backward: grad_x shape");
    if (!grad_w.same_shape(weights)) throw dimension_error("conv2d_backward: grad_w shape");
    int chunks = std::min(cout, 8);
    std::vector<Tensor> gx_part(chunks);
    parallel_chunks(chunks, [&](int chunk) {
        gx_part[chunk] = Tensor(x.ch, x.h, x.w, 0.0);
        int block = (cout + chunks - 1) / chunks;
        for (int co = chunk * block; co < std::min(cout, (chunk + 1) * block); ++co) {
            double gb = 0.0;
            for (int r = 0; r < x.h; ++r)
                for (int c = 0; c < x.w; ++c) {
                    double g = grad_out.at(co, r, c);
                    if (g == 0.0) continue;
                    gb += g;
                    for (int ci = 0; ci < cin; ++ci)
                        for (int kr = 0; kr < k; ++kr) {
                            int rr = r + kr - p;
                            if (rr < 0 || rr >= x.h) continue;
                            for (int kc = 0; kc < k; ++kc) {
                                int cc = c + kc - p;
                                if (cc < 0 || cc >= x.w) continue;
                                grad_w.at(co, ci * k + kr, kc) += g * x.at(ci, rr, cc);
                                gx_part[chunk].at(ci, rr, cc) +=
                                    g * weights.at(co, ci * k + kr, kc);
                            }
                        }
                }
            grad_b.v[co] += gb;
        }
    });
    for (int chunk = 0; chunk < chunks; ++chunk)
        for (size_t i = 0; i < grad_x.v.size(); ++i) grad_x.v[i] += gx_part[chunk].v[i];
}

NodeId Tape::push(Tensor val, bool track, std::function<void()> back) {
    nodes_.push_back({std::move(val), Tensor{}, track, std::move(back)});
    return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::add_grad(NodeId id, const Tensor& g) {
    Node& n = nodes_[id];
    if (!n.track) return;
    if (n.grad.v.empty()) n.grad = Tensor(n.val.ch, n.val.h, n.val.w, 0.0);
    for (size_t i = 0; i < g.v.size(); ++i) n.grad.v[i] += g.v[i];
}

void Tape::check_shape(NodeId a, NodeId b, const char* op) const {
    if (!nodes_[a].val.same_shape(nodes_[b].val))
        throw dimension_error(std::string(op) + ": operand shapes differ");
}

NodeId Tape::constant(Tensor v) { return push(std::move(v), false); }

NodeId Tape::input(Tensor v) { return push(std::move(v), true); }

NodeId Tape::param(const std::string& name) {
    if (!params_) throw parameter_error("tape: no parameter store attached");
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end()) return it->second;
    int pi = params_->find(name);
    if (pi < 0) throw parameter_error("tape: unknown parameter " + name);
    NodeId id = push(params_->entries[pi].value, true);
    nodes_[id].back = [this, id, pi]() {
        const Tensor& g = nodes_[id].grad;
        if (g.v.empty()) return;
        ParamStore::Entry& e = params_->entries[pi];
        if (e.grad.v.empty()) e.grad = Tensor(g.ch, g.h, g.w, 0.0);
        for (size_t i = 0; i < g.v.size(); ++i) e.grad.v[i] += g.v[i];
    };
    param_nodes_[name] = id;
    return id;
}

NodeId Tape::add(NodeId a, NodeId b) {
    check_shape(a, b, "add");
    Tensor out = nodes_[a].val;
    out.v = lact::add(nodes_[a].val.v, nodes_[b].val.v);
    bool track = nodes_[a].track || nodes_[b].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, a, b]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            add_grad(a, g);
            add_grad(b, g);
        };
    return id;
}

NodeId Tape::sub(NodeId a, NodeId b) {
    check_shape(a, b, "sub");
    Tensor out = nodes_[a].val;
    out.v = lact::sub(nodes_[a].val.v, nodes_[b].val.v);
    bool track = nodes_[a].track || nodes_[b].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, a, b]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            add_grad(a, g);
            Tensor neg = g;
            for (double& x : neg.v) x = -x;
            add_grad(b, neg);
        };
    return id;
}

NodeId Tape::mul(NodeId a, NodeId b) {
    check_shape(a, b, "mul");
    Tensor out = nodes_[a].val;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = nodes_[a].val.v[i] * nodes_[b].val.v[i];
    bool track = nodes_[a].track || nodes_[b].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, a, b]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            Tensor ga = g, gb = g;
            for (size_t i = 0; i < g.v.size(); ++i) {
                ga.v[i] = g.v[i] * nodes_[b].val.v[i];
                gb.v[i] = g.v[i] * nodes_[a].val.v[i];
            }
            add_grad(a, ga);
            add_grad(b, gb);
        };
    return id;
}

NodeId Tape::div(NodeId a, NodeId b) {
    check_shape(a, b, "div");
    Tensor out = nodes_[a].val;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = nodes_[a].val.v[i] / nodes_[b].val.v[i];
    bool track = nodes_[a].track || nodes_[b].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, a, b]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            Tensor ga = g, gb = g;
            for (size_t i = 0; i < g.v.size(); ++i) {
                double bv = nodes_[b].val.v[i];
                ga.v[i] = g.v[i] / bv;
                gb.v[i] = -g.v[i] * nodes_[a].val.v[i] / (bv * bv);
            }
            add_grad(a, ga);
            add_grad(b, gb);
        };
    return id;
}

NodeId Tape::scale(NodeId x, double c) {
    Tensor out = nodes_[x].val;
    out.v = lact::scale(c, nodes_[x].val.v);
    bool track = nodes_[x].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, x, c]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            Tensor gx = g;
            for (double& v : gx.v) v *= c;
            add_grad(x, gx);
        };
    return id;
}

NodeId Tape::axpy(NodeId s, NodeId x, NodeId y) {
    check_shape(x, y, "axpy");
    if (nodes_[s].val.size() != 1) throw dimension_error("axpy: scale must be a scalar node");
    double a = nodes_[s].val.v[0];
    Tensor out = nodes_[x].val;
    out.v = lact::axpy(a, nodes_[x].val.v, nodes_[y].val.v);
    bool track = nodes_[s].track || nodes_[x].track || nodes_[y].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, s, x, y]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            double a = nodes_[s].val.v[0];
            Tensor gx = g;
            for (size_t i = 0; i < g.v.size(); ++i) gx.v[i] = a * g.v[i];
            add_grad(x, gx);
            add_grad(y, g);
            add_grad(s, Tensor::scalar(lact::dot(nodes_[x].val.v, g.v)));
        };
    return id;
}

NodeId Tape::relu(NodeId x) {
    Tensor out = nodes_[x].val;
    for (double& v : out.v) v = v > 0.0 ? v : 0.0;
    bool track = nodes_[x].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, x]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            Tensor gx = g;
            for (size_t i = 0; i < g.v.size(); ++i)
                gx.v[i] = nodes_[x].val.v[i] > 0.0 ? g.v[i] : 0.0;
            add_grad(x, gx);
        };
    return id;
}

NodeId Tape::softshrink(NodeId x, std::vector<double> thr) {
    const Tensor& in = nodes_[x].val;
    if (static_cast<int>(thr.size()) != in.ch)
        throw dimension_error("softshrink: one threshold per channel required");
    Tensor out = in;
    size_t npx = static_cast<size_t>(in.h) * in.w;
    for (int c = 0; c < in.ch; ++c) {
        if (thr[c] < 0.0) continue;  // pass-through channel
        for (size_t i = c * npx; i < (c + 1) * npx; ++i)
            out.v[i] = soft_threshold_scalar(in.v[i], thr[c]);
    }
    bool track = nodes_[x].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, x, thr, npx]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            Tensor gx = g;
            const Tensor& in = nodes_[x].val;
            for (int c = 0; c < in.ch; ++c) {
                if (thr[c] < 0.0) continue;
                for (size_t i = c * npx; i < (c + 1) * npx; ++i)
                    gx.v[i] = std::fabs(in.v[i]) > thr[c] ? g.v[i] : 0.0;
            }
            add_grad(x, gx);
        };
    return id;
}

NodeId Tape::chan_scale(NodeId x, std::vector<double> w) {
    const Tensor& in = nodes_[x].val;
    if (static_cast<int>(w.size()) != in.ch)
        throw dimension_error("chan_scale: one weight per channel required");
    Tensor out = in;
    size_t npx = static_cast<size_t>(in.h) * in.w;
    for (int c = 0; c < in.ch; ++c)
        for (size_t i = c * npx; i < (c + 1) * npx; ++i) out.v[i] = in.v[i] * w[c];
    bool track = nodes_[x].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, x, w, npx]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            Tensor gx = g;
            for (int c = 0; c < nodes_[x].val.ch; ++c)
                for (size_t i = c * npx; i < (c + 1) * npx; ++i) gx.v[i] = g.v[i] * w[c];
            add_grad(x, gx);
        };
    return id;
}

NodeId Tape::row_scale(NodeId x, std::vector<double> w) {
    const Tensor& in = nodes_[x].val;
    if (static_cast<int>(w.size()) != in.h)
        throw dimension_error("row_scale: one weight per row required");
    Tensor out = in;
    for (int c = 0; c < in.ch; ++c)
        for (int r = 0; r < in.h; ++r)
            for (int col = 0; col < in.w; ++col) out.at(c, r, col) = in.at(c, r, col) * w[r];
    bool track = nodes_[x].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, x, w]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            Tensor gx = g;
            for (int c = 0; c < gx.ch; ++c)
                for (int r = 0; r < gx.h; ++r)
                    for (int col = 0; col < gx.w; ++col) gx.at(c, r, col) = g.at(c, r, col) * w[r];
            add_grad(x, gx);
        };
    return id;
}

NodeId Tape::concat_ch(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    if (ta.h != tb.h || ta.w != tb.w) throw dimension_error("concat_ch: spatial shapes differ");
    Tensor out(ta.ch + tb.ch, ta.h, ta.w);
    std::copy(ta.v.begin(), ta.v.end(), out.v.begin());
    std::copy(tb.v.begin(), tb.v.end(), out.v.begin() + ta.v.size());
    bool track = nodes_[a].track || nodes_[b].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, a, b]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            const Tensor& ta = nodes_[a].val;
            Tensor ga(ta.ch, ta.h, ta.w), gb(nodes_[b].val.ch, ta.h, ta.w);
            std::copy(g.v.begin(), g.v.begin() + ga.v.size(), ga.v.begin());
            std::copy(g.v.begin() + ga.v.size(), g.v.end(), gb.v.begin());
            add_grad(a, ga);
            add_grad(b, gb);
        };
    return id;
}

NodeId Tape::concat_rows(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[a].val;
    const Tensor& tb = nodes_[b].val;
    if (ta.ch != tb.ch || ta.w != tb.w) throw dimension_error("concat_rows: shapes differ");
    Tensor out(ta.ch, ta.h + tb.h, ta.w);
    for (int c = 0; c < ta.ch; ++c) {
        for (int r = 0; r < ta.h; ++r)
            for (int col = 0; col < ta.w; ++col) out.at(c, r, col) = ta.at(c, r, col);
        for (int r = 0; r < tb.h; ++r)
            for (int col = 0; col < tb.w; ++col) out.at(c, ta.h + r, col) = tb.at(c, r, col);
    }
    bool track = nodes_[a].track || nodes_[b].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, a, b]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            const Tensor& ta = nodes_[a].val;
            const Tensor& tb = nodes_[b].val;
            Tensor ga(ta.ch, ta.h, ta.w), gb(tb.ch, tb.h, tb.w);
            for (int c = 0; c < ta.ch; ++c) {
                for (int r = 0; r < ta.h; ++r)
                    for (int col = 0; col < ta.w; ++col) ga.at(c, r, col) = g.at(c, r, col);
                for (int r = 0; r < tb.h; ++r)
                    for (int col = 0; col < tb.w; ++col) gb.at(c, r, col) = g.at(c, ta.h + r, col);
            }
            add_grad(a, ga);
            add_grad(b, gb);
        };
    return id;
}

NodeId Tape::slice_rows(NodeId x, int r0, int r1) {
    const Tensor& in = nodes_[x].val;
    if (r0 < 0 || r1 > in.h || r0 >= r1) throw dimension_error("slice_rows: bad range");
    Tensor out(in.ch, r1 - r0, in.w);
    for (int c = 0; c < in.ch; ++c)
        for (int r = r0; r < r1; ++r)
            for (int col = 0; col < in.w; ++col) out.at(c, r - r0, col) = in.at(c, r, col);
    bool track = nodes_[x].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, x, r0, r1]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            const Tensor& in = nodes_[x].val;
            Tensor gx(in.ch, in.h, in.w, 0.0);
            for (int c = 0; c < in.ch; ++c)
                for (int r = r0; r < r1; ++r)
                    for (int col = 0; col < in.w; ++col) gx.at(c, r, col) = g.at(c, r - r0, col);
            add_grad(x, gx);
        };
    return id;
}

NodeId Tape::avgpool2(NodeId x) {
    const Tensor& in = nodes_[x].val;
    int oh = in.h / 2, ow = in.w / 2;
    if (oh < 1 || ow < 1) throw dimension_error("avgpool2: input too small");
    Tensor out(in.ch, oh, ow);
    for (int c = 0; c < in.ch; ++c)
        for (int r = 0; r < oh; ++r)
            for (int col = 0; col < ow; ++col)
                out.at(c, r, col) = 0.25 * (in.at(c, 2 * r, 2 * col) + in.at(c, 2 * r, 2 * col + 1) +
                                            in.at(c, 2 * r + 1, 2 * col) +
                                            in.at(c, 2 * r + 1, 2 * col + 1));
    bool track = nodes_[x].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, x]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            const Tensor& in = nodes_[x].val;
            Tensor gx(in.ch, in.h, in.w, 0.0);
            int oh = in.h / 2, ow = in.w / 2;
            for (int c = 0; c < in.ch; ++c)
                for (int r = 0; r < oh; ++r)
                    for (int col = 0; col < ow; ++col) {
                        double q = 0.25 * g.at(c, r, col);
                        gx.at(c, 2 * r, 2 * col) += q;
                        gx.at(c, 2 * r, 2 * col + 1) += q;
                        gx.at(c, 2 * r + 1, 2 * col) += q;
                        gx.at(c, 2 * r + 1, 2 * col + 1) += q;
                    }
            add_grad(x, gx);
        };
    return id;
}

NodeId Tape::upsample2(NodeId x) {
    const Tensor& in = nodes_[x].val;
    Tensor out(in.ch, in.h * 2, in.w * 2);
    for (int c = 0; c < in.ch; ++c)
        for (int r = 0; r < in.h; ++r)
            for (int col = 0; col < in.w; ++col) {
                double v = in.at(c, r, col);
                out.at(c, 2 * r, 2 * col) = v;
                out.at(c, 2 * r, 2 * col + 1) = v;
                out.at(c, 2 * r + 1, 2 * col) = v;
                out.at(c, 2 * r + 1, 2 * col + 1) = v;
            }
    bool track = nodes_[x].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, x]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            const Tensor& in = nodes_[x].val;
            Tensor gx(in.ch, in.h, in.w, 0.0);
            for (int c = 0; c < in.ch; ++c)
                for (int r = 0; r < in.h; ++r)
                    for (int col = 0; col < in.w; ++col)
                        gx.at(c, r, col) = g.at(c, 2 * r, 2 * col) + g.at(c, 2 * r, 2 * col + 1) +
                                           g.at(c, 2 * r + 1, 2 * col) +
                                           g.at(c, 2 * r + 1, 2 * col + 1);
            add_grad(x, gx);
        };
    return id;
}

NodeId Tape::conv2d(NodeId x, NodeId w, NodeId b) {
    Tensor out = conv2d_forward(nodes_[x].val, nodes_[w].val, nodes_[b].val);
    bool track = nodes_[x].track || nodes_[w].track || nodes_[b].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, x, w, b]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            const Tensor& xv = nodes_[x].val;
            const Tensor& wv = nodes_[w].val;
            Tensor gx(xv.ch, xv.h, xv.w, 0.0);
            Tensor gw(wv.ch, wv.h, wv.w, 0.0);
            Tensor gb(wv.ch, 1, 1, 0.0);
            conv2d_backward(xv, wv, g, gx, gw, gb);
            add_grad(x, gx);
            add_grad(w, gw);
            add_grad(b, gb);
        };
    return id;
}

NodeId Tape::gauss_blur(NodeId x, const std::vector<double>& taps) {
    const Tensor& in = nodes_[x].val;
    int kk = static_cast<int>(taps.size());
    if (in.h < kk || in.w < kk) throw parameter_error("gauss_blur: image smaller than kernel");
    int oh = in.h - kk + 1, ow = in.w - kk + 1;
    Tensor out(in.ch, oh, ow);
    std::vector<double> tmp(static_cast<size_t>(in.h) * ow);
    for (int c = 0; c < in.ch; ++c) {
        for (int r = 0; r < in.h; ++r)
            for (int col = 0; col < ow; ++col) {
                double s = 0.0;
                for (int k = 0; k < kk; ++k) s += taps[k] * in.at(c, r, col + k);
                tmp[static_cast<size_t>(r) * ow + col] = s;
            }
        for (int r = 0; r < oh; ++r)
            for (int col = 0; col < ow; ++col) {
                double s = 0.0;
                for (int k = 0; k < kk; ++k) s += taps[k] * tmp[static_cast<size_t>(r + k) * ow + col];
                out.at(c, r, col) = s;
            }
    }
    bool track = nodes_[x].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, x, taps]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            const Tensor& in = nodes_[x].val;
            int kk = static_cast<int>(taps.size());
            int oh = in.h - kk + 1, ow = in.w - kk + 1;
            Tensor gx(in.ch, in.h, in.w, 0.0);
            std::vector<double> gtmp(static_cast<size_t>(in.h) * ow);
            for (int c = 0; c < in.ch; ++c) {
                std::fill(gtmp.begin(), gtmp.end(), 0.0);
                for (int r = 0; r < oh; ++r)
                    for (int col = 0; col < ow; ++col) {
                        double gv = g.at(c, r, col);
                        for (int k = 0; k < kk; ++k)
                            gtmp[static_cast<size_t>(r + k) * ow + col] += taps[k] * gv;
                    }
                for (int r = 0; r < in.h; ++r)
                    for (int col = 0; col < ow; ++col) {
                        double gv = gtmp[static_cast<size_t>(r) * ow + col];
                        if (gv == 0.0) continue;
                        for (int k = 0; k < kk; ++k) gx.at(c, r, col + k) += taps[k] * gv;
                    }
            }
            add_grad(x, gx);
        };
    return id;
}

NodeId Tape::project(NodeId x, const ScanGeometry& g) {
    Image u = to_image(nodes_[x].val);
    Tensor out = from_sinogram(forward_project(u, g));
    bool track = nodes_[x].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, x, g]() {
            const Tensor& gr = nodes_[id].grad;
            if (gr.v.empty()) return;
            add_grad(x, from_image(back_project(to_sinogram(gr, g), g)));
        };
    return id;
}

NodeId Tape::backproject(NodeId y, const ScanGeometry& g) {
    Sinogram s = to_sinogram(nodes_[y].val, g);
    Tensor out = from_image(back_project(s, g));
    bool track = nodes_[y].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, y, g]() {
            const Tensor& gr = nodes_[id].grad;
            if (gr.v.empty()) return;
            add_grad(y, from_sinogram(forward_project(to_image(gr), g)));
        };
    return id;
}

NodeId Tape::ril(NodeId y, const ScanGeometry& g, const FilterSpec& f) {
    Sinogram s = to_sinogram(nodes_[y].val, g);
    Tensor out = from_image(ril_apply(s, g, f));
    bool track = nodes_[y].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, y, g, f]() {
            const Tensor& gr = nodes_[id].grad;
            if (gr.v.empty()) return;
            add_grad(y, from_sinogram(ril_adjoint(to_image(gr), g, f)));
        };
    return id;
}

NodeId Tape::embed_rows(NodeId y, const AngleSelector& sel, const ScanGeometry& g_ext) {
    ScanGeometry g_meas = g_ext;
    g_meas.angles_deg.clear();
    for (int idx : sel.measured_indices) g_meas.angles_deg.push_back(g_ext.angles_deg[idx]);
    Sinogram s = to_sinogram(nodes_[y].val, g_meas);
    Tensor out = from_sinogram(embed_views(s, sel, g_ext));
    bool track = nodes_[y].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, y, sel, g_ext]() {
            const Tensor& gr = nodes_[id].grad;
            if (gr.v.empty()) return;
            add_grad(y, from_sinogram(select_views(to_sinogram(gr, g_ext), sel)));
        };
    return id;
}

NodeId Tape::decompose(NodeId x, const FrameTransform& ft) {
    Tensor out = from_coeffs(frame_decompose(to_image(nodes_[x].val), ft));
    bool track = nodes_[x].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, x, ft]() {
            const Tensor& gr = nodes_[id].grad;
            if (gr.v.empty()) return;
            add_grad(x, from_image(frame_reconstruct(to_coeffs(gr, ft.levels), ft)));
        };
    return id;
}

NodeId Tape::reconstruct(NodeId z, const FrameTransform& ft) {
    Tensor out = from_image(frame_reconstruct(to_coeffs(nodes_[z].val, ft.levels), ft));
    bool track = nodes_[z].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, z, ft]() {
            const Tensor& gr = nodes_[id].grad;
            if (gr.v.empty()) return;
            add_grad(z, from_coeffs(frame_decompose(to_image(gr), ft)));
        };
    return id;
}

NodeId Tape::dot(NodeId a, NodeId b) {
    check_shape(a, b, "dot");
    Tensor out = Tensor::scalar(lact::dot(nodes_[a].val.v, nodes_[b].val.v));
    bool track = nodes_[a].track || nodes_[b].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, a, b]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            double g0 = g.v[0];
            Tensor ga = nodes_[b].val, gb = nodes_[a].val;
            for (double& v : ga.v) v *= g0;
            for (double& v : gb.v) v *= g0;
            add_grad(a, ga);
            add_grad(b, gb);
        };
    return id;
}

NodeId Tape::sum_abs(NodeId x) {
    Tensor out = Tensor::scalar(lact::sum_abs(nodes_[x].val.v));
    bool track = nodes_[x].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, x]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            double g0 = g.v[0];
            const Tensor& in = nodes_[x].val;
            Tensor gx(in.ch, in.h, in.w, 0.0);
            for (size_t i = 0; i < in.v.size(); ++i)
                gx.v[i] = in.v[i] > 0.0 ? g0 : (in.v[i] < 0.0 ? -g0 : 0.0);
            add_grad(x, gx);
        };
    return id;
}

NodeId Tape::weighted_sum_abs(NodeId x, Tensor weights) {
    const Tensor& in = nodes_[x].val;
    if (!weights.same_shape(in)) throw dimension_error("weighted_sum_abs: weight shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < in.v.size(); ++i) s += weights.v[i] * std::fabs(in.v[i]);
    bool track = nodes_[x].track;
    NodeId id = push(Tensor::scalar(s), track);
    if (track)
        nodes_[id].back = [this, id, x, weights]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            double g0 = g.v[0];
            const Tensor& in = nodes_[x].val;
            Tensor gx(in.ch, in.h, in.w, 0.0);
            for (size_t i = 0; i < in.v.size(); ++i)
                gx.v[i] = in.v[i] > 0.0 ? g0 * weights.v[i]
                                        : (in.v[i] < 0.0 ? -g0 * weights.v[i] : 0.0);
            add_grad(x, gx);
        };
    return id;
}

NodeId Tape::mean(NodeId x) {
    const Tensor& in = nodes_[x].val;
    double s = 0.0;
    for (double v : in.v) s += v;
    s /= static_cast<double>(in.v.size());
    bool track = nodes_[x].track;
    NodeId id = push(Tensor::scalar(s), track);
    if (track)
        nodes_[id].back = [this, id, x]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            const Tensor& in = nodes_[x].val;
            double q = g.v[0] / static_cast<double>(in.v.size());
            Tensor gx(in.ch, in.h, in.w, q);
            add_grad(x, gx);
        };
    return id;
}

NodeId Tape::sqrt_s(NodeId s) {
    if (nodes_[s].val.size() != 1) throw dimension_error("sqrt_s: scalar node required");
    double v = nodes_[s].val.v[0];
    Tensor out = Tensor::scalar(std::sqrt(std::max(0.0, v)));
    bool track = nodes_[s].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, s]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            double out = nodes_[id].val.v[0];
            double gs = out > 0.0 ? 0.5 * g.v[0] / out : 0.0;
            add_grad(s, Tensor::scalar(gs));
        };
    return id;
}

NodeId Tape::powc(NodeId s, double e) {
    if (nodes_[s].val.size() != 1) throw dimension_error("powc: scalar node required");
    double v = nodes_[s].val.v[0];
    Tensor out = Tensor::scalar(v > 0.0 ? std::pow(v, e) : 0.0);
    bool track = nodes_[s].track;
    NodeId id = push(std::move(out), track);
    if (track)
        nodes_[id].back = [this, id, s, e]() {
            const Tensor& g = nodes_[id].grad;
            if (g.v.empty()) return;
            double v = nodes_[s].val.v[0];
            double gs = v > 0.0 ? g.v[0] * e * std::pow(v, e - 1.0) : 0.0;
            add_grad(s, Tensor::scalar(gs));
        };
    return id;
}

void Tape::backward(NodeId loss) {
    if (nodes_[loss].val.size() != 1)
        throw dimension_error("backward: loss must be a scalar node");
    if (!nodes_[loss].track)
        throw parameter_error("backward: loss does not depend on any tracked input");
    add_grad(loss, Tensor::scalar(1.0));
    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.back && !n.grad.v.empty()) n.back();
    }
}

}  // namespace lact::nn
