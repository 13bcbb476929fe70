#include "mimmu/numerics/tape.hpp"

#include "mimmu/numerics/nn_kernels.hpp"

namespace mimmu::num {

GradientTape::VarId GradientTape::push(
    Tensor v, bool tracked, std::function<void(GradientTape&)> back) {
    Node n;
    n.value = std::move(v);
    n.tracked = tracked;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size() - 1);
}

void GradientTape::check(VarId v) const {
    if (v < 0 || static_cast<std::size_t>(v) >= nodes_.size())
        throw std::out_of_range("GradientTape: bad VarId");
}

Tensor& GradientTape::grad_buf(VarId v) {
    Node& n = nodes_[v];
    if (n.grad.data.empty()) n.grad = Tensor(n.value.shape);
    return n.grad;
}

GradientTape::VarId GradientTape::input(Tensor v) {
    return push(std::move(v), true, {});
}

GradientTape::VarId GradientTape::constant(Tensor v) {
    return push(std::move(v), false, {});
}

GradientTape::VarId GradientTape::param(const ParamVector& p) {
    return push(Tensor({p.size()}, p.values()), true, {});
}

GradientTape::VarId GradientTape::slice(VarId src, std::size_t offset,
                                        std::size_t rows, std::size_t cols) {
    check(src);
    const Tensor& s = nodes_[src].value;
    if (offset + rows * cols > s.size())
        throw std::out_of_range("GradientTape::slice: out of range");
    Tensor v({rows, cols});
    std::copy(s.data.begin() + static_cast<std::ptrdiff_t>(offset),
              s.data.begin() + static_cast<std::ptrdiff_t>(offset + rows * cols),
              v.data.begin());
    bool tracked = nodes_[src].tracked;
    return push(std::move(v), tracked,
                [src, offset](GradientTape& t) {
                    VarId self = t.current_;
                    const Tensor& g = t.nodes_[self].grad;
                    Tensor& pg = t.grad_buf(src);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        pg[offset + i] += g[i];
                });
}

GradientTape::VarId GradientTape::affine(VarId X, VarId W, VarId b) {
    check(X); check(W); check(b);
    const Tensor& x = nodes_[X].value;
    const Tensor& w = nodes_[W].value;
    const Tensor& bias = nodes_[b].value;
    std::size_t batch = x.rows(), in = x.cols(), out = w.rows();
    if (w.cols() != in || bias.size() != out)
        throw std::invalid_argument("GradientTape::affine: shape mismatch");
    Tensor y({batch, out});
    kernels::affine_forward(x.data.data(), w.data.data(), bias.data.data(),
                            y.data.data(), batch, in, out);
    bool tracked = nodes_[X].tracked || nodes_[W].tracked || nodes_[b].tracked;
    return push(std::move(y), tracked,
                [X, W, b, batch, in, out](GradientTape& t) {
                    VarId self = t.current_;
                    const Tensor& dy = t.nodes_[self].grad;
                    const Tensor& x = t.nodes_[X].value;
                    const Tensor& w = t.nodes_[W].value;
                    Tensor& dx = t.grad_buf(X);
                    Tensor& dw = t.grad_buf(W);
                    Tensor& db = t.grad_buf(b);
                    kernels::affine_backward(x.data.data(), w.data.data(),
                                             dy.data.data(), dx.data.data(),
                                             dw.data.data(), db.data.data(),
                                             batch, in, out);
                });
}

GradientTape::VarId GradientTape::tanh(VarId a) {
    check(a);
    const Tensor& x = nodes_[a].value;
    Tensor y(x.shape);
    kernels::tanh_forward(x.data.data(), y.data.data(), x.size());
    return push(std::move(y), nodes_[a].tracked,
                [a](GradientTape& t) {
                    VarId self = t.current_;
                    const Tensor& y = t.nodes_[self].value;
                    const Tensor& dy = t.nodes_[self].grad;
                    Tensor& dx = t.grad_buf(a);
                    kernels::tanh_backward(y.data.data(), dy.data.data(),
                                           dx.data.data(), y.size());
                });
}

GradientTape::VarId GradientTape::silu(VarId a) {
    check(a);
    const Tensor& x = nodes_[a].value;
    Tensor y(x.shape);
    kernels::silu_forward(x.data.data(), y.data.data(), x.size());
    return push(std::move(y), nodes_[a].tracked,
                [a](GradientTape& t) {
                    VarId self = t.current_;
                    const Tensor& x = t.nodes_[a].value;
                    const Tensor& dy = t.nodes_[self].grad;
                    Tensor& dx = t.grad_buf(a);
                    kernels::silu_backward(x.data.data(), dy.data.data(),
                                           dx.data.data(), x.size());
                });
}

GradientTape::VarId GradientTape::add(VarId a, VarId b) {
    return add_scaled(a, 1.0, b, 1.0);
}

GradientTape::VarId GradientTape::sub(VarId a, VarId b) {
    return add_scaled(a, 1.0, b, -1.0);
}

GradientTape::VarId GradientTape::add_scaled(VarId a, double ca, VarId b,
                                             double cb) {
    check(a); check(b);
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[b].value;
    if (!va.same_shape(vb))
        throw std::invalid_argument("GradientTape::add_scaled: shape mismatch");
    Tensor y(va.shape);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = ca * va[i] + cb * vb[i];
    bool tracked = nodes_[a].tracked || nodes_[b].tracked;
    return push(std::move(y), tracked,
                [a, b, ca, cb](GradientTape& t) {
                    VarId self = t.current_;
                    const Tensor& dy = t.nodes_[self].grad;
                    Tensor& da = t.grad_buf(a);
                    Tensor& db = t.grad_buf(b);
                    for (std::size_t i = 0; i < dy.size(); ++i) {
                        da[i] += ca * dy[i];
                        db[i] += cb * dy[i];
                    }
                });
}

GradientTape::VarId GradientTape::scale(VarId a, double c) {
    check(a);
    const Tensor& va = nodes_[a].value;
    Tensor y(va.shape);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = c * va[i];
    return push(std::move(y), nodes_[a].tracked,
                [a, c](GradientTape& t) {
                    VarId self = t.current_;
                    const Tensor& dy = t.nodes_[self].grad;
                    Tensor& da = t.grad_buf(a);
                    for (std::size_t i = 0; i < dy.size(); ++i)
                        da[i] += c * dy[i];
                });
}

GradientTape::VarId GradientTape::concat_cols(const std::vector<VarId>& parts) {
    if (parts.empty())
        throw std::invalid_argument("GradientTape::concat_cols: empty");
    std::size_t batch = nodes_.at(parts[0]).value.rows();
    std::size_t total = 0;
    bool tracked = false;
    for (VarId p : parts) {
        check(p);
        if (nodes_[p].value.rows() != batch)
            throw std::invalid_argument(
                "GradientTape::concat_cols: batch mismatch");
        total += nodes_[p].value.cols();
        tracked = tracked || nodes_[p].tracked;
    }
    Tensor y({batch, total});
    std::size_t col = 0;
    for (VarId p : parts) {
        const Tensor& v = nodes_[p].value;
        std::size_t c = v.cols();
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < c; ++i)
                y[b * total + col + i] = v[b * c + i];
        col += c;
    }
    return push(std::move(y), tracked,
                [parts, batch, total](GradientTape& t) {
                    VarId self = t.current_;
                    const Tensor& dy = t.nodes_[self].grad;
                    std::size_t col = 0;
                    for (VarId p : parts) {
                        std::size_t c = t.nodes_[p].value.cols();
                        Tensor& dp = t.grad_buf(p);
                        for (std::size_t b = 0; b < batch; ++b)
                            for (std::size_t i = 0; i < c; ++i)
                                dp[b * c + i] += dy[b * total + col + i];
                        col += c;
                    }
                });
}

GradientTape::VarId GradientTape::lookup_rows(VarId table,
                                              std::vector<std::size_t> idx) {
    check(table);
    const Tensor& tab = nodes_[table].value;
    std::size_t e = tab.cols();
    Tensor y({idx.size(), e});
    for (std::size_t b = 0; b < idx.size(); ++b) {
        if (idx[b] >= tab.rows())
            throw std::out_of_range("GradientTape::lookup_rows: bad index");
        for (std::size_t i = 0; i < e; ++i)
            y[b * e + i] = tab[idx[b] * e + i];
    }
    return push(std::move(y), nodes_[table].tracked,
                [table, idx = std::move(idx), e](GradientTape& t) {
                    VarId self = t.current_;
                    const Tensor& dy = t.nodes_[self].grad;
                    Tensor& dt = t.grad_buf(table);
                    for (std::size_t b = 0; b < idx.size(); ++b)
                        for (std::size_t i = 0; i < e; ++i)
                            dt[idx[b] * e + i] += dy[b * e + i];
                });
}

GradientTape::VarId GradientTape::sum_sq(VarId a) {
    check(a);
    const Tensor& va = nodes_[a].value;
    double s = 0.0;
    for (double v : va.data) s += v * v;
    return push(Tensor::scalar(s), nodes_[a].tracked,
                [a](GradientTape& t) {
                    VarId self = t.current_;
                    double g = t.nodes_[self].grad[0];
                    const Tensor& va = t.nodes_[a].value;
                    Tensor& da = t.grad_buf(a);
                    for (std::size_t i = 0; i < va.size(); ++i)
                        da[i] += 2.0 * g * va[i];
                });
}

GradientTape::VarId GradientTape::dot(VarId a, VarId b) {
    check(a); check(b);
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[b].value;
    if (!va.same_shape(vb))
        throw std::invalid_argument("GradientTape::dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) s += va[i] * vb[i];
    bool tracked = nodes_[a].tracked || nodes_[b].tracked;
    return push(Tensor::scalar(s), tracked,
                [a, b](GradientTape& t) {
                    VarId self = t.current_;
                    double g = t.nodes_[self].grad[0];
                    const Tensor& va = t.nodes_[a].value;
                    const Tensor& vb = t.nodes_[b].value;
                    Tensor& da = t.grad_buf(a);
                    Tensor& db = t.grad_buf(b);
                    for (std::size_t i = 0; i < va.size(); ++i) {
                        da[i] += g * vb[i];
                        db[i] += g * va[i];
                    }
                });
}

GradientTape::VarId GradientTape::stop_gradient(VarId a) {
    check(a);
    return push(nodes_[a].value, false, {});
}

void GradientTape::backward(VarId scalar_output) {
    check(scalar_output);
    if (nodes_[scalar_output].value.size() != 1)
        throw std::invalid_argument("GradientTape::backward: output not scalar");
    if (!nodes_[scalar_output].tracked)
        throw std::invalid_argument(
            "GradientTape::backward: output not connected to any tracked input");
    for (auto& n : nodes_)
        if (!n.grad.data.empty())
            std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
    grad_buf(scalar_output)[0] = 1.0;
    for (VarId v = scalar_output; v >= 0; --v) {
        Node& n = nodes_[v];
        if (!n.back || n.grad.data.empty() || !n.tracked) continue;
        current_ = v;
        n.back(*this);
    }
    swept_ = true;
}

const Tensor& GradientTape::grad(VarId leaf) const {
    check(leaf);
    if (!swept_)
        throw std::logic_error("GradientTape::grad: call backward() first");
    const Node& n = nodes_[leaf];
    if (n.grad.data.empty()) {
        // disconnected leaf: materialize a zero gradient once
        auto& mut = const_cast<Node&>(n);
        mut.grad = Tensor(n.value.shape);
    }
    return n.grad;
}

}  // namespace mimmu::num
