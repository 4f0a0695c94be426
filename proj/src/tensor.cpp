#include "userhan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace userhan {

struct Tensor::Impl {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
};

namespace {

int product(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Accumulate into x's grad buffer only; intermediates get grads too so the
// chain can flow, leaves keep theirs for the optimizer.
std::vector<double>& g(Tensor& x) { return x.grad(); }

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data.assign(product(t.impl_->shape), 0.0);
    t.impl_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    int n = product(shape);
    if (static_cast<int>(data.size()) != n)
        throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(data);
    t.impl_->requires_grad = requires_grad;
    t.check_finite("tensor construction");
    return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> v, bool requires_grad) {
    int n = static_cast<int>(v.size());
    return from({n}, std::move(v), requires_grad);
}

const std::vector<int>& Tensor::shape() const { return impl_->shape; }
int Tensor::size() const { return static_cast<int>(impl_->data.size()); }
bool Tensor::is_scalar() const { return impl_->data.size() == 1; }

std::vector<double>& Tensor::data() { return impl_->data; }
const std::vector<double>& Tensor::data() const { return impl_->data; }

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool v) { impl_->requires_grad = v; }

std::vector<double>& Tensor::grad() {
    if (impl_->grad.size() != impl_->data.size()) impl_->grad.assign(impl_->data.size(), 0.0);
    return impl_->grad;
}

bool Tensor::has_grad() const { return impl_->grad.size() == impl_->data.size(); }

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::item() const {
    if (impl_->data.size() != 1) throw std::invalid_argument("item() requires a scalar tensor");
    return impl_->data[0];
}

Tensor Tensor::clone() const {
    Tensor t;
    t.impl_ = std::make_shared<Impl>(*impl_);
    t.impl_->grad.clear();
    return t;
}

void Tensor::check_finite(const std::string& context) const {
    for (double v : impl_->data)
        if (!std::isfinite(v))
            throw std::runtime_error("non-finite value detected in " + context);
}

void Tape::record(Tensor output, std::function<void()> backward) {
    nodes_.push_back({std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
    if (!loss.is_scalar())
        throw std::invalid_argument("backward requires a scalar loss, got shape of size " +
                                    std::to_string(loss.size()));
    for (auto& n : nodes_) n.output.zero_grad();
    Tensor l = loss;
    l.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
}

// ---- ops ----------------------------------------------------------------

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw std::invalid_argument("matmul: incompatible shapes " + [&] {
            std::ostringstream os;
            os << "[";
            for (std::size_t i = 0; i < a.shape().size(); ++i) os << (i ? "x" : "") << a.shape()[i];
            os << "] and [";
            for (std::size_t i = 0; i < b.shape().size(); ++i) os << (i ? "x" : "") << b.shape()[i];
            os << "]";
            return os.str();
        }());
    int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor c = Tensor::zeros({m, n});
    const auto& ad = a.data();
    const auto& bd = b.data();
    auto& cd = c.data();
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            double av = ad[i * k + p];
            for (int j = 0; j < n; ++j) cd[i * n + j] += av * bd[p * n + j];
        }
    Tensor ac = a, bc = b, cc = c;
    t.record(c, [ac, bc, cc, m, k, n]() mutable {
        const auto& gc = cc.grad();
        auto& ga = g(ac);
        auto& gb = g(bc);
        const auto& ad2 = ac.data();
        const auto& bd2 = bc.data();
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                double s = 0;
                for (int j = 0; j < n; ++j) s += gc[i * n + j] * bd2[p * n + j];
                ga[i * k + p] += s;
            }
        for (int p = 0; p < k; ++p)
            for (int j = 0; j < n; ++j) {
                double s = 0;
                for (int i = 0; i < m; ++i) s += ad2[i * k + p] * gc[i * n + j];
                gb[p * n + j] += s;
            }
    });
    return c;
}

Tensor matvec(Tape& t, const Tensor& w, const Tensor& x) {
    if (w.shape().size() != 2 || x.shape().size() != 1 || w.shape()[1] != x.shape()[0])
        throw std::invalid_argument("matvec: shape mismatch");
    int m = w.shape()[0], n = w.shape()[1];
    Tensor y = Tensor::zeros({m});
    const auto& wd = w.data();
    const auto& xd = x.data();
    auto& yd = y.data();
    for (int i = 0; i < m; ++i) {
        double s = 0;
        for (int j = 0; j < n; ++j) s += wd[i * n + j] * xd[j];
        yd[i] = s;
    }
    Tensor wc = w, xc = x, yc = y;
    t.record(y, [wc, xc, yc, m, n]() mutable {
        const auto& gy = yc.grad();
        auto& gw = g(wc);
        auto& gx = g(xc);
        const auto& wd2 = wc.data();
        const auto& xd2 = xc.data();
        for (int i = 0; i < m; ++i) {
            double gi = gy[i];
            for (int j = 0; j < n; ++j) {
                gw[i * n + j] += gi * xd2[j];
                gx[j] += gi * wd2[i * n + j];
            }
        }
    });
    return y;
}

Tensor vecmat(Tape& t, const Tensor& a, const Tensor& h) {
    if (a.shape().size() != 1 || h.shape().size() != 2 || a.shape()[0] != h.shape()[0])
        throw std::invalid_argument("vecmat: shape mismatch");
    int T = h.shape()[0], d = h.shape()[1];
    Tensor y = Tensor::zeros({d});
    const auto& ad = a.data();
    const auto& hd = h.data();
    auto& yd = y.data();
    for (int i = 0; i < T; ++i)
        for (int j = 0; j < d; ++j) yd[j] += ad[i] * hd[i * d + j];
    Tensor ac = a, hc = h, yc = y;
    t.record(y, [ac, hc, yc, T, d]() mutable {
        const auto& gy = yc.grad();
        auto& ga = g(ac);
        auto& gh = g(hc);
        const auto& ad2 = ac.data();
        const auto& hd2 = hc.data();
        for (int i = 0; i < T; ++i) {
            double s = 0;
            for (int j = 0; j < d; ++j) {
                s += gy[j] * hd2[i * d + j];
                gh[i * d + j] += ad2[i] * gy[j];
            }
            ga[i] += s;
        }
    });
    return y;
}

Tensor dot(Tape& t, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = std::inner_product(a.data().begin(), a.data().end(), b.data().begin(), 0.0);
    Tensor y = Tensor::scalar(s);
    Tensor ac = a, bc = b, yc = y;
    t.record(y, [ac, bc, yc]() mutable {
        double gy = yc.grad()[0];
        auto& ga = g(ac);
        auto& gb = g(bc);
        const auto& ad = ac.data();
        const auto& bd = bc.data();
        for (std::size_t i = 0; i < ad.size(); ++i) {
            ga[i] += gy * bd[i];
            gb[i] += gy * ad[i];
        }
    });
    return y;
}

namespace {

template <class Fwd, class Bwd>
Tensor binary_ew(Tape& t, const Tensor& a, const Tensor& b, const char* name, Fwd f, Bwd bk) {
    require_same_shape(a, b, name);
    Tensor y = Tensor::zeros(a.shape());
    for (int i = 0; i < a.size(); ++i) y.data()[i] = f(a.data()[i], b.data()[i]);
    Tensor ac = a, bc = b, yc = y;
    t.record(y, [ac, bc, yc, bk]() mutable {
        const auto& gy = yc.grad();
        auto& ga = g(ac);
        auto& gb = g(bc);
        for (std::size_t i = 0; i < gy.size(); ++i)
            bk(gy[i], ac.data()[i], bc.data()[i], ga[i], gb[i]);
    });
    return y;
}

template <class Fwd, class Bwd>
Tensor unary_ew(Tape& t, const Tensor& x, Fwd f, Bwd df) {
    Tensor y = Tensor::zeros(x.shape());
    for (int i = 0; i < x.size(); ++i) y.data()[i] = f(x.data()[i]);
    Tensor xc = x, yc = y;
    t.record(y, [xc, yc, df]() mutable {
        const auto& gy = yc.grad();
        auto& gx = g(xc);
        for (std::size_t i = 0; i < gy.size(); ++i)
            gx[i] += gy[i] * df(xc.data()[i], yc.data()[i]);
    });
    return y;
}

}  // namespace

Tensor add(Tape& t, const Tensor& a, const Tensor& b) {
    return binary_ew(t, a, b, "add", [](double x, double y) { return x + y; },
                     [](double gy, double, double, double& ga, double& gb) {
                         ga += gy;
                         gb += gy;
                     });
}

Tensor sub(Tape& t, const Tensor& a, const Tensor& b) {
    return binary_ew(t, a, b, "sub", [](double x, double y) { return x - y; },
                     [](double gy, double, double, double& ga, double& gb) {
                         ga += gy;
                         gb -= gy;
                     });
}

Tensor mul(Tape& t, const Tensor& a, const Tensor& b) {
    return binary_ew(t, a, b, "mul", [](double x, double y) { return x * y; },
                     [](double gy, double av, double bv, double& ga, double& gb) {
                         ga += gy * bv;
                         gb += gy * av;
                     });
}

Tensor scale(Tape& t, const Tensor& a, double c) {
    return unary_ew(t, a, [c](double v) { return c * v; },
                    [c](double, double) { return c; });
}

Tensor tanh_op(Tape& t, const Tensor& x) {
    return unary_ew(t, x, [](double v) { return std::tanh(v); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid_op(Tape& t, const Tensor& x) {
    return unary_ew(t, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                    [](double, double y) { return y * (1.0 - y); });
}

Tensor exp_op(Tape& t, const Tensor& x) {
    return unary_ew(t, x, [](double v) { return std::exp(v); },
                    [](double, double y) { return y; });
}

Tensor log_op(Tape& t, const Tensor& x) {
    for (double v : x.data())
        if (v <= 0.0)
            throw std::domain_error("log: input must be strictly positive, got " +
                                    std::to_string(v));
    return unary_ew(t, x, [](double v) { return std::log(v); },
                    [](double v, double) { return 1.0 / v; });
}

Tensor neg_op(Tape& t, const Tensor& x) {
    return unary_ew(t, x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor softmax(Tape& t, const Tensor& x) {
    if (x.shape().size() != 1 || x.size() < 1)
        throw std::invalid_argument("softmax: requires a non-empty rank-1 tensor");
    int n = x.size();
    double mx = *std::max_element(x.data().begin(), x.data().end());
    Tensor y = Tensor::zeros({n});
    double z = 0;
    for (int i = 0; i < n; ++i) {
        y.data()[i] = std::exp(x.data()[i] - mx);
        z += y.data()[i];
    }
    for (int i = 0; i < n; ++i) y.data()[i] /= z;
    Tensor xc = x, yc = y;
    t.record(y, [xc, yc, n]() mutable {
        const auto& gy = yc.grad();
        const auto& yd = yc.data();
        auto& gx = g(xc);
        double s = 0;
        for (int i = 0; i < n; ++i) s += gy[i] * yd[i];
        for (int i = 0; i < n; ++i) gx[i] += yd[i] * (gy[i] - s);
    });
    return y;
}

Tensor sum(Tape& t, const Tensor& x) {
    double s = std::accumulate(x.data().begin(), x.data().end(), 0.0);
    Tensor y = Tensor::scalar(s);
    Tensor xc = x, yc = y;
    t.record(y, [xc, yc]() mutable {
        double gy = yc.grad()[0];
        auto& gx = g(xc);
        for (auto& v : gx) v += gy;
    });
    return y;
}

Tensor concat(Tape& t, const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 1 || b.shape().size() != 1)
        throw std::invalid_argument("concat: rank-1 tensors only");
    int na = a.size(), nb = b.size();
    Tensor y = Tensor::zeros({na + nb});
    std::copy(a.data().begin(), a.data().end(), y.data().begin());
    std::copy(b.data().begin(), b.data().end(), y.data().begin() + na);
    Tensor ac = a, bc = b, yc = y;
    t.record(y, [ac, bc, yc, na, nb]() mutable {
        const auto& gy = yc.grad();
        auto& ga = g(ac);
        auto& gb = g(bc);
        for (int i = 0; i < na; ++i) ga[i] += gy[i];
        for (int i = 0; i < nb; ++i) gb[i] += gy[na + i];
    });
    return y;
}

Tensor stack_rows(Tape& t, const std::vector<Tensor>& rows) {
    if (rows.empty()) throw std::invalid_argument("stack_rows: empty input");
    int d = rows[0].size();
    int T = static_cast<int>(rows.size());
    Tensor y = Tensor::zeros({T, d});
    for (int i = 0; i < T; ++i) {
        if (rows[i].shape().size() != 1 || rows[i].size() != d)
            throw std::invalid_argument("stack_rows: rows must be rank-1 of equal length");
        std::copy(rows[i].data().begin(), rows[i].data().end(), y.data().begin() + i * d);
    }
    std::vector<Tensor> rc = rows;
    Tensor yc = y;
    t.record(y, [rc, yc, T, d]() mutable {
        const auto& gy = yc.grad();
        for (int i = 0; i < T; ++i) {
            auto& gr = g(rc[i]);
            for (int j = 0; j < d; ++j) gr[j] += gy[i * d + j];
        }
    });
    return y;
}

Tensor stack_scalars(Tape& t, const std::vector<Tensor>& xs) {
    if (xs.empty()) throw std::invalid_argument("stack_scalars: empty input");
    int n = static_cast<int>(xs.size());
    Tensor y = Tensor::zeros({n});
    for (int i = 0; i < n; ++i) y.data()[i] = xs[i].item();
    std::vector<Tensor> xc = xs;
    Tensor yc = y;
    t.record(y, [xc, yc, n]() mutable {
        const auto& gy = yc.grad();
        for (int i = 0; i < n; ++i) g(xc[i])[0] += gy[i];
    });
    return y;
}

Tensor row(Tape& t, const Tensor& m, int i) {
    if (m.shape().size() != 2 || i < 0 || i >= m.shape()[0])
        throw std::invalid_argument("row: index out of range");
    int d = m.shape()[1];
    Tensor y = Tensor::zeros({d});
    std::copy(m.data().begin() + i * d, m.data().begin() + (i + 1) * d, y.data().begin());
    Tensor mc = m, yc = y;
    t.record(y, [mc, yc, i, d]() mutable {
        const auto& gy = yc.grad();
        auto& gm = g(mc);
        for (int j = 0; j < d; ++j) gm[i * d + j] += gy[j];
    });
    return y;
}

// ---- gradient check -----------------------------------------------------

double grad_check(const std::function<Tensor(Tape&)>& build_loss,
                  const std::vector<Tensor>& params, double eps) {
    if (eps <= 0) throw std::invalid_argument("grad_check: eps must be positive");
    auto eval = [&]() {
        Tape tape;
        Tensor loss = build_loss(tape);
        double v = loss.item();
        if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite loss value");
        return v;
    };
    std::vector<Tensor> ps = params;
    for (auto& p : ps) p.zero_grad();
    {
        Tape tape;
        Tensor loss = build_loss(tape);
        if (!std::isfinite(loss.item()))
            throw std::runtime_error("grad_check: non-finite loss value");
        tape.backward(loss);
    }
    double worst = 0.0;
    for (auto& p : ps) {
        const auto& analytic = p.grad();
        for (int i = 0; i < p.size(); ++i) {
            double saved = p.data()[i];
            p.data()[i] = saved + eps;
            double up = eval();
            p.data()[i] = saved - eps;
            double down = eval();
            p.data()[i] = saved;
            double numeric = (up - down) / (2 * eps);
            double a = analytic[i];
            double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace userhan
