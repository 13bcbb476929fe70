#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mimmu/numerics/param_vector.hpp"
#include "mimmu/numerics/tensor.hpp"

namespace mimmu::num {

// Reverse-mode gradient recorder over Tensor-valued nodes. The tape is
// rebuilt per forward pass; there is no persistent graph. Ops call the
// shared kernels from nn_kernels.hpp, so a taped forward is bit-identical
// to the plain forward built from the same kernels.
class GradientTape {
   public:
    using VarId = int;
    static constexpr VarId invalid = -1;

    // Leaves -----------------------------------------------------------
    VarId input(Tensor v);            // gradient-tracked leaf
    VarId constant(Tensor v);         // untracked leaf
    VarId param(const ParamVector& p);  // tracked leaf holding the flat vector

    // Ops --------------------------------------------------------------
    // view of a flat vector node as a (rows, cols) matrix
    VarId slice(VarId src, std::size_t offset, std::size_t rows,
                std::size_t cols);
    // X:(batch,in) x W:(out,in) + b:(out) -> (batch,out)
    VarId affine(VarId X, VarId W, VarId b);
    VarId tanh(VarId x);
    VarId silu(VarId x);
    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId scale(VarId a, double c);
    VarId add_scaled(VarId a, double ca, VarId b, double cb);
    // column-wise concatenation of equal-batch matrices
    VarId concat_cols(const std::vector<VarId>& parts);
    // per-batch embedding lookup: table:(n,e), idx per row -> (batch,e)
    VarId lookup_rows(VarId table, std::vector<std::size_t> idx);
    VarId sum_sq(VarId a);            // scalar sum of squares
    VarId dot(VarId a, VarId b);      // scalar inner product
    VarId stop_gradient(VarId a);     // value copy, gradient blocked

    // Access -----------------------------------------------------------
    const Tensor& value(VarId v) const { return nodes_.at(v).value; }

    // Reverse sweep from a scalar output. Gradients of all tracked
    // leaves become available through grad().
    void backward(VarId scalar_output);

    // Gradient of the last backward() scalar w.r.t. a tracked leaf.
    // Zero tensor when the leaf is disconnected from the output.
    const Tensor& grad(VarId leaf) const;

    std::size_t node_count() const { return nodes_.size(); }

   private:
    struct Node {
        Tensor value;
        Tensor grad;  // allocated lazily during backward
        bool tracked = false;
        std::function<void(GradientTape&)> back;  // empty for leaves
    };

    VarId push(Tensor v, bool tracked, std::function<void(GradientTape&)> back);
    Tensor& grad_buf(VarId v);
    void check(VarId v) const;

    std::vector<Node> nodes_;
    VarId current_ = invalid;  // node whose backward closure is running
    bool swept_ = false;
};

}  // namespace mimmu::num
