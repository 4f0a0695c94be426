#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace userhan {

// Dense row-major tensor of 64-bit floats. Copies are shallow; two Tensor
// handles may refer to the same storage (this is what lets a Tape mutate
// gradients through the handles the caller kept).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor vector(std::vector<double> v, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const;
    int size() const;
    bool is_scalar() const;

    std::vector<double>& data();
    const std::vector<double>& data() const;

    bool requires_grad() const;
    void set_requires_grad(bool v);

    // Allocated lazily; zero-filled on first access.
    std::vector<double>& grad();
    bool has_grad() const;
    void zero_grad();

    double item() const;  // scalar tensors only

    // Deep copy of values; no graph association, keeps requires_grad.
    Tensor clone() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

    // Throws if any stored value is NaN or infinite.
    void check_finite(const std::string& context) const;

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

// Topologically ordered record of applied operations. Nodes are appended in
// execution order, so walking the record backwards is a reverse topological
// traversal that visits each node exactly once. Gradients accumulate
// additively when a tensor feeds several consumers.
class Tape {
public:
    // Registers an op; the backward rule reads output.grad() and accumulates
    // into the inputs' grads.
    void record(Tensor output, std::function<void()> backward);

    // Zeros all op-output grads, seeds d(loss)/d(loss) = 1 and replays the
    // recorded backward rules in reverse order. loss must be a scalar.
    // Repeated calls accumulate into leaf (parameter) grads.
    void backward(const Tensor& loss);

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        Tensor output;
        std::function<void()> backward;
    };
    std::vector<Node> nodes_;
};

// ---- differentiable ops -------------------------------------------------

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b);      // [m,k]x[k,n]
Tensor matvec(Tape& t, const Tensor& w, const Tensor& x);      // [m,n]x[n] -> [n? m]
Tensor vecmat(Tape& t, const Tensor& a, const Tensor& h);      // [T]x[T,d] -> [d]
Tensor dot(Tape& t, const Tensor& a, const Tensor& b);         // [n].[n] -> scalar

Tensor add(Tape& t, const Tensor& a, const Tensor& b);         // same shape
Tensor sub(Tape& t, const Tensor& a, const Tensor& b);
Tensor mul(Tape& t, const Tensor& a, const Tensor& b);         // elementwise
Tensor scale(Tape& t, const Tensor& a, double c);

Tensor tanh_op(Tape& t, const Tensor& x);
Tensor sigmoid_op(Tape& t, const Tensor& x);
Tensor exp_op(Tape& t, const Tensor& x);
Tensor log_op(Tape& t, const Tensor& x);   // throws on non-positive input
Tensor neg_op(Tape& t, const Tensor& x);

// Max-subtracted stable softmax over a rank-1 tensor.
Tensor softmax(Tape& t, const Tensor& x);

Tensor sum(Tape& t, const Tensor& x);                          // -> scalar
Tensor concat(Tape& t, const Tensor& a, const Tensor& b);      // rank-1 concat
Tensor stack_rows(Tape& t, const std::vector<Tensor>& rows);   // T x [d] -> [T,d]
Tensor stack_scalars(Tape& t, const std::vector<Tensor>& xs);  // T scalars -> [T]
Tensor row(Tape& t, const Tensor& m, int i);                   // [T,d] -> [d]

// ---- gradient checking --------------------------------------------------

// Central-difference check of autodiff gradients. build_loss must rebuild the
// same scalar loss from the current parameter values each call. Returns the
// max over all parameter coordinates of |a - n| / max(1e-8, |a| + |n|).
double grad_check(const std::function<Tensor(Tape&)>& build_loss,
                  const std::vector<Tensor>& params, double eps);

}  // namespace userhan
