#include "panama/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace panama::ad {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Array::Array(Shape s, double fill) : shape(std::move(s)), data(shape_size(shape), fill) {}

Array::Array(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (shape_size(shape) != data.size()) {
        throw std::invalid_argument("Array: shape " + shape_string(shape) + " does not match " +
                                    std::to_string(data.size()) + " values");
    }
}

Array Array::vector(std::vector<double> values) {
    Shape s{values.size()};
    return Array(std::move(s), std::move(values));
}

Array Array::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Array(Shape{rows, cols}, std::move(values));
}

bool Array::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------

const Array& Var::value() const { return graph_->value(id_); }
const Shape& Var::shape() const { return value().shape; }
std::size_t Var::size() const { return value().size(); }
bool Var::requires_grad() const { return graph_->requires_grad(id_); }
const std::vector<double>& Var::grad() const { return graph_->grad(id_); }

double Var::item() const {
    if (size() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_string(shape()));
    return value().data[0];
}

Var Graph::push(Node node) {
    if (nodes_.size() >= UINT32_MAX) throw std::length_error("graph too large");
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::leaf(Array value, bool requires_grad) {
    if (!value.all_finite()) throw std::invalid_argument("non-finite value in leaf tensor");
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

bool Graph::any_requires_grad(std::initializer_list<Var> inputs) {
    return std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); });
}

Var Graph::record(Array value, std::initializer_list<Var> inputs, Adjoint adjoint) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(adjoint));
}

Var Graph::record(Array value, const std::vector<Var>& inputs, Adjoint adjoint) {
    Node n;
    n.value = std::move(value);
    for (const Var& v : inputs) {
        if (&v.graph() != this) throw std::invalid_argument("op inputs belong to different graphs");
        n.requires_grad = n.requires_grad || v.requires_grad();
    }
    if (n.requires_grad) n.adjoint = std::move(adjoint);
    return push(std::move(n));
}

const std::vector<double>& Graph::grad(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.requires_grad ? n.grad : empty_;
}

std::vector<double>& Graph::grad_acc(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

void Graph::zero_grad() {
    for (Node& n : nodes_) {
        if (n.requires_grad) n.grad.assign(n.value.size(), 0.0);
        else n.grad.clear();
    }
}

void Graph::backward(Var root) {
    if (&root.graph() != this) throw std::invalid_argument("backward: root belongs to another graph");
    if (root.size() != 1) {
        throw std::invalid_argument("backward: root must be scalar, got shape " + shape_string(root.shape()));
    }
    zero_grad();
    if (!nodes_[root.id()].requires_grad) return;
    nodes_[root.id()].grad[0] = 1.0;
    for (std::int64_t id = root.id(); id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.requires_grad && n.adjoint) n.adjoint(*this, static_cast<std::uint32_t>(id));
    }
}

// ---------------------------------------------------------------------------

namespace {

void require_same_shape(const char* op, Var a, Var b) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                                    " and " + shape_string(b.shape()));
    }
}

// y = f(x) elementwise; the derivative is expressed through x and y.
template <class F, class D>
Var unary(Var a, F f, D deriv) {
    const Array& x = a.value();
    Array y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = f(x.data[i]);
    const std::uint32_t ai = a.id();
    return a.graph().record(std::move(y), {a}, [ai, deriv](Graph& g, std::uint32_t self) {
        if (!g.requires_grad(ai)) return;
        const auto& x = g.value(ai).data;
        const auto& y = g.value(self).data;
        const auto& gy = g.grad(self);
        auto& gx = g.grad_acc(ai);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * deriv(x[i], y[i]);
    });
}

void accumulate(Graph& g, std::uint32_t target, const std::vector<double>& src, double factor = 1.0) {
    if (!g.requires_grad(target)) return;
    auto& acc = g.grad_acc(target);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += factor * src[i];
}

}  // namespace

Var add(Var a, Var b) {
    require_same_shape("add", a, b);
    Array y = a.value();
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += bv[i];
    const auto ai = a.id(), bi = b.id();
    return a.graph().record(std::move(y), {a, b}, [ai, bi](Graph& g, std::uint32_t self) {
        accumulate(g, ai, g.grad(self));
        accumulate(g, bi, g.grad(self));
    });
}

Var sub(Var a, Var b) {
    require_same_shape("sub", a, b);
    Array y = a.value();
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] -= bv[i];
    const auto ai = a.id(), bi = b.id();
    return a.graph().record(std::move(y), {a, b}, [ai, bi](Graph& g, std::uint32_t self) {
        accumulate(g, ai, g.grad(self));
        accumulate(g, bi, g.grad(self), -1.0);
    });
}

Var mul(Var a, Var b) {
    require_same_shape("mul", a, b);
    Array y = a.value();
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] *= bv[i];
    const auto ai = a.id(), bi = b.id();
    return a.graph().record(std::move(y), {a, b}, [ai, bi](Graph& g, std::uint32_t self) {
        const auto& gy = g.grad(self);
        if (g.requires_grad(ai)) {
            const auto& bv = g.value(bi).data;
            auto& ga = g.grad_acc(ai);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * bv[i];
        }
        if (g.requires_grad(bi)) {
            const auto& av = g.value(ai).data;
            auto& gb = g.grad_acc(bi);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * av[i];
        }
    });
}

Var scale(Var a, double s) {
    return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
    return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var tanh(Var a) {
    return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
    return unary(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a) {
    for (double v : a.value().data) {
        if (!(v > 0.0)) throw std::domain_error("log: non-positive input");
    }
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var exp(Var a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var abs(Var a) {
    return unary(
        a, [](double x) { return std::abs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(Var a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp_floor(Var a, double floor) {
    return unary(
        a, [floor](double x) { return std::max(x, floor); },
        [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------

Var reshape(Var a, Shape shape) {
    if (shape_size(shape) != a.size()) {
        throw std::invalid_argument("reshape: cannot view " + shape_string(a.shape()) + " as " +
                                    shape_string(shape));
    }
    Array y(std::move(shape), a.value().data);
    const auto ai = a.id();
    return a.graph().record(std::move(y), {a},
                            [ai](Graph& g, std::uint32_t self) { accumulate(g, ai, g.grad(self)); });
}

Var broadcast_time(Var v, std::size_t steps) {
    if (v.value().rank() != 1) {
        throw std::invalid_argument("broadcast_time: expected a vector, got " + shape_string(v.shape()));
    }
    const std::size_t d = v.size();
    Array y(Shape{d, steps});
    for (std::size_t r = 0; r < d; ++r) std::fill_n(y.data.begin() + r * steps, steps, v.value().data[r]);
    const auto vi = v.id();
    return v.graph().record(std::move(y), {v}, [vi, d, steps](Graph& g, std::uint32_t self) {
        const auto& gy = g.grad(self);
        auto& gv = g.grad_acc(vi);
        for (std::size_t r = 0; r < d; ++r) {
            double s = 0.0;
            for (std::size_t t = 0; t < steps; ++t) s += gy[r * steps + t];
            gv[r] += s;
        }
    });
}

Var add_time_broadcast(Var series, Var v) {
    const Shape& s = series.shape();
    if (s.size() != 2 || v.size() != s[0]) {
        throw std::invalid_argument("add_time_broadcast: cannot add " + shape_string(v.shape()) + " to series " +
                                    shape_string(s));
    }
    const std::size_t d = s[0], steps = s[1];
    Array y = series.value();
    const auto& vv = v.value().data;
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t t = 0; t < steps; ++t) y.data[r * steps + t] += vv[r];
    const auto si = series.id(), vi = v.id();
    return series.graph().record(std::move(y), {series, v}, [si, vi, d, steps](Graph& g, std::uint32_t self) {
        const auto& gy = g.grad(self);
        accumulate(g, si, gy);
        if (g.requires_grad(vi)) {
            auto& gv = g.grad_acc(vi);
            for (std::size_t r = 0; r < d; ++r) {
                double acc = 0.0;
                for (std::size_t t = 0; t < steps; ++t) acc += gy[r * steps + t];
                gv[r] += acc;
            }
        }
    });
}

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const std::size_t rank = parts.front().value().rank();
    if (rank != 1 && rank != 2) throw std::invalid_argument("concat: only rank 1 or 2 supported");
    Shape out_shape = parts.front().shape();
    out_shape[0] = 0;
    for (const Var& p : parts) {
        if (p.value().rank() != rank || (rank == 2 && p.shape()[1] != out_shape[1])) {
            throw std::invalid_argument("concat: incompatible shape " + shape_string(p.shape()));
        }
        out_shape[0] += p.shape()[0];
    }
    Array y(out_shape);
    std::vector<std::pair<std::uint32_t, std::size_t>> spans;
    std::size_t offset = 0;
    for (const Var& p : parts) {
        std::copy(p.value().data.begin(), p.value().data.end(), y.data.begin() + offset);
        spans.emplace_back(p.id(), offset);
        offset += p.size();
    }
    return parts.front().graph().record(std::move(y), parts, [spans](Graph& g, std::uint32_t self) {
        const auto& gy = g.grad(self);
        for (auto [id, off] : spans) {
            if (!g.requires_grad(id)) continue;
            auto& gp = g.grad_acc(id);
            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gy[off + i];
        }
    });
}

Var slice(Var a, std::size_t begin, std::size_t length) {
    const Shape& s = a.shape();
    if (s.empty() || s.size() > 2) throw std::invalid_argument("slice: only rank 1 or 2 supported");
    const std::size_t cols = s.back();
    const std::size_t rows = s.size() == 2 ? s[0] : 1;
    if (begin + length > cols) {
        throw std::invalid_argument("slice: range [" + std::to_string(begin) + ", " +
                                    std::to_string(begin + length) + ") exceeds length " + std::to_string(cols));
    }
    Shape out_shape = s;
    out_shape.back() = length;
    Array y(out_shape);
    const auto& av = a.value().data;
    for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(av.begin() + r * cols + begin, length, y.data.begin() + r * length);
    const auto ai = a.id();
    return a.graph().record(std::move(y), {a}, [ai, rows, cols, begin, length](Graph& g, std::uint32_t self) {
        const auto& gy = g.grad(self);
        auto& ga = g.grad_acc(ai);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t t = 0; t < length; ++t) ga[r * cols + begin + t] += gy[r * length + t];
    });
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_string(sa) + " and " + shape_string(sb));
    }
    const std::size_t m = sa[0], n = sa[1], p = sb[1];
    Array y(Shape{m, p});
    const double* A = a.value().data.data();
    const double* B = b.value().data.data();
    double* C = y.data.data();
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = C + i * p;
        for (std::size_t k = 0; k < n; ++k) {
            const double aik = A[i * n + k];
            if (aik == 0.0) continue;
            const double* brow = B + k * p;
            for (std::size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
        }
    }
    const auto ai = a.id(), bi = b.id();
    return a.graph().record(std::move(y), {a, b}, [ai, bi, m, n, p](Graph& g, std::uint32_t self) {
        const double* G = g.grad(self).data();
        const double* A = g.value(ai).data.data();
        const double* B = g.value(bi).data.data();
        if (g.requires_grad(ai)) {
            double* GA = g.grad_acc(ai).data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t k = 0; k < n; ++k) {
                    const double* brow = B + k * p;
                    const double* grow = G + i * p;
                    double s = 0.0;
                    for (std::size_t j = 0; j < p; ++j) s += grow[j] * brow[j];
                    GA[i * n + k] += s;
                }
        }
        if (g.requires_grad(bi)) {
            double* GB = g.grad_acc(bi).data();
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = G + i * p;
                for (std::size_t k = 0; k < n; ++k) {
                    const double aik = A[i * n + k];
                    if (aik == 0.0) continue;
                    double* gbrow = GB + k * p;
                    for (std::size_t j = 0; j < p; ++j) gbrow[j] += aik * grow[j];
                }
            }
        }
    });
}

Var sum(Var a) {
    const auto& v = a.value().data;
    const double s = std::accumulate(v.begin(), v.end(), 0.0);
    const auto ai = a.id();
    return a.graph().record(Array::scalar(s), {a}, [ai](Graph& g, std::uint32_t self) {
        const double gy = g.grad(self)[0];
        for (double& x : g.grad_acc(ai)) x += gy;
    });
}

Var mean(Var a) {
    if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

// ---------------------------------------------------------------------------

Var conv1d_dilated(Var input, Var kernel, std::size_t dilation, bool causal_pad) {
    const Shape& si = input.shape();
    const Shape& sk = kernel.shape();
    if (dilation < 1) throw std::invalid_argument("conv1d_dilated: dilation must be >= 1");
    if (si.size() != 2 || sk.size() != 3) {
        throw std::invalid_argument("conv1d_dilated: expected input [C_in x T] and kernel [C_out x C_in x K], got " +
                                    shape_string(si) + " and " + shape_string(sk));
    }
    if (si[0] != sk[1]) {
        throw std::invalid_argument("conv1d_dilated: input has C_in=" + std::to_string(si[0]) +
                                    " but kernel expects C_in=" + std::to_string(sk[1]) + " (input " +
                                    shape_string(si) + ", kernel " + shape_string(sk) + ")");
    }
    const std::size_t cin = si[0], steps = si[1], cout = sk[0], taps = sk[2];
    const std::size_t span = dilation * (taps - 1);
    if (!causal_pad && steps <= span) {
        throw std::invalid_argument("conv1d_dilated: input length " + std::to_string(steps) +
                                    " too short for unpadded kernel span " + std::to_string(span));
    }
    const std::size_t out_len = causal_pad ? steps : steps - span;

    // Output index t reads input index t + shift(j).
    auto shift = [=](std::size_t j) -> std::ptrdiff_t {
        return causal_pad ? -static_cast<std::ptrdiff_t>(dilation * (taps - 1 - j))
                          : static_cast<std::ptrdiff_t>(dilation * j);
    };

    Array y(Shape{cout, out_len});
    const double* X = input.value().data.data();
    const double* W = kernel.value().data.data();
    for (std::size_t o = 0; o < cout; ++o) {
        double* out = y.data.data() + o * out_len;
        for (std::size_t i = 0; i < cin; ++i) {
            const double* in = X + i * steps;
            for (std::size_t j = 0; j < taps; ++j) {
                const double w = W[(o * cin + i) * taps + j];
                if (w == 0.0) continue;
                const std::ptrdiff_t sh = shift(j);
                const std::size_t t0 = sh < 0 ? static_cast<std::size_t>(-sh) : 0;
                const std::size_t t1 = std::min<std::ptrdiff_t>(out_len, static_cast<std::ptrdiff_t>(steps) - sh);
                for (std::size_t t = t0; t < t1; ++t) out[t] += w * in[t + sh];
            }
        }
    }

    const auto ii = input.id(), ki = kernel.id();
    return input.graph().record(
        std::move(y), {input, kernel},
        [ii, ki, cin, steps, cout, taps, out_len, shift](Graph& g, std::uint32_t self) {
            const double* G = g.grad(self).data();
            const double* X = g.value(ii).data.data();
            const double* W = g.value(ki).data.data();
            double* GX = g.requires_grad(ii) ? g.grad_acc(ii).data() : nullptr;
            double* GW = g.requires_grad(ki) ? g.grad_acc(ki).data() : nullptr;
            for (std::size_t o = 0; o < cout; ++o) {
                const double* gout = G + o * out_len;
                for (std::size_t i = 0; i < cin; ++i) {
                    const double* in = X + i * steps;
                    for (std::size_t j = 0; j < taps; ++j) {
                        const std::size_t widx = (o * cin + i) * taps + j;
                        const std::ptrdiff_t sh = shift(j);
                        const std::size_t t0 = sh < 0 ? static_cast<std::size_t>(-sh) : 0;
                        const std::size_t t1 =
                            std::min<std::ptrdiff_t>(out_len, static_cast<std::ptrdiff_t>(steps) - sh);
                        if (GW) {
                            double s = 0.0;
                            for (std::size_t t = t0; t < t1; ++t) s += gout[t] * in[t + sh];
                            GW[widx] += s;
                        }
                        if (GX) {
                            const double w = W[widx];
                            double* gin = GX + i * steps;
                            for (std::size_t t = t0; t < t1; ++t) gin[t + sh] += w * gout[t];
                        }
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------

namespace {

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LstmCache {
    std::vector<double> gates;   // [T x 4H] post-activation i, f, g, o
    std::vector<double> cells;   // [T x H]
    std::vector<double> hidden;  // [T x H]
};

}  // namespace

Var lstm_layer(Var input, Var w_ih, Var w_hh, Var bias) {
    const Shape& si = input.shape();
    const Shape& swi = w_ih.shape();
    const Shape& swh = w_hh.shape();
    if (si.size() != 2 || swi.size() != 2 || swh.size() != 2) {
        throw std::invalid_argument("lstm_layer: expected rank-2 input and weights");
    }
    const std::size_t in_dim = si[0], steps = si[1], h4 = swh[0], hid = swh[1];
    if (h4 != 4 * hid || swi[0] != h4 || swi[1] != in_dim || bias.size() != h4) {
        throw std::invalid_argument("lstm_layer: inconsistent shapes input " + shape_string(si) + ", w_ih " +
                                    shape_string(swi) + ", w_hh " + shape_string(swh) + ", bias " +
                                    shape_string(bias.shape()));
    }
    const bool keep = Graph::any_requires_grad({input, w_ih, w_hh, bias});
    auto cache = std::make_shared<LstmCache>();
    if (keep) {
        cache->gates.resize(steps * h4);
        cache->cells.resize(steps * hid);
        cache->hidden.resize(steps * hid);
    }

    const double* X = input.value().data.data();
    const double* Wi = w_ih.value().data.data();
    const double* Wh = w_hh.value().data.data();
    const double* B = bias.value().data.data();
    Array y(Shape{hid, steps});
    std::vector<double> h(hid, 0.0), c(hid, 0.0), pre(h4);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t r = 0; r < h4; ++r) {
            double s = B[r];
            const double* wi = Wi + r * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) s += wi[i] * X[i * steps + t];
            const double* wh = Wh + r * hid;
            for (std::size_t k = 0; k < hid; ++k) s += wh[k] * h[k];
            pre[r] = s;
        }
        for (std::size_t k = 0; k < hid; ++k) {
            const double ig = sigm(pre[k]);
            const double fg = sigm(pre[hid + k]);
            const double gg = std::tanh(pre[2 * hid + k]);
            const double og = sigm(pre[3 * hid + k]);
            c[k] = fg * c[k] + ig * gg;
            h[k] = og * std::tanh(c[k]);
            y.data[k * steps + t] = h[k];
            if (keep) {
                double* gt = cache->gates.data() + t * h4;
                gt[k] = ig;
                gt[hid + k] = fg;
                gt[2 * hid + k] = gg;
                gt[3 * hid + k] = og;
                cache->cells[t * hid + k] = c[k];
                cache->hidden[t * hid + k] = h[k];
            }
        }
    }
    if (!keep) return input.graph().constant(std::move(y));

    const auto xi = input.id(), wii = w_ih.id(), whi = w_hh.id(), bi = bias.id();
    return input.graph().record(
        std::move(y), {input, w_ih, w_hh, bias},
        [cache, xi, wii, whi, bi, in_dim, steps, h4, hid](Graph& g, std::uint32_t self) {
            const double* G = g.grad(self).data();
            const double* X = g.value(xi).data.data();
            const double* Wi = g.value(wii).data.data();
            const double* Wh = g.value(whi).data.data();
            double* GX = g.requires_grad(xi) ? g.grad_acc(xi).data() : nullptr;
            double* GWi = g.requires_grad(wii) ? g.grad_acc(wii).data() : nullptr;
            double* GWh = g.requires_grad(whi) ? g.grad_acc(whi).data() : nullptr;
            double* GB = g.requires_grad(bi) ? g.grad_acc(bi).data() : nullptr;
            std::vector<double> dh_next(hid, 0.0), dc_next(hid, 0.0), dpre(h4);
            for (std::size_t tt = steps; tt-- > 0;) {
                const double* gt = cache->gates.data() + tt * h4;
                const double* ct = cache->cells.data() + tt * hid;
                const double* cprev = tt > 0 ? cache->cells.data() + (tt - 1) * hid : nullptr;
                const double* hprev = tt > 0 ? cache->hidden.data() + (tt - 1) * hid : nullptr;
                for (std::size_t k = 0; k < hid; ++k) {
                    const double ig = gt[k], fg = gt[hid + k], gg = gt[2 * hid + k], og = gt[3 * hid + k];
                    const double tc = std::tanh(ct[k]);
                    const double dh = G[k * steps + tt] + dh_next[k];
                    const double dout = dh * tc;
                    const double dc = dh * og * (1.0 - tc * tc) + dc_next[k];
                    const double cp = cprev ? cprev[k] : 0.0;
                    dpre[k] = dc * gg * ig * (1.0 - ig);
                    dpre[hid + k] = dc * cp * fg * (1.0 - fg);
                    dpre[2 * hid + k] = dc * ig * (1.0 - gg * gg);
                    dpre[3 * hid + k] = dout * og * (1.0 - og);
                    dc_next[k] = dc * fg;
                }
                std::fill(dh_next.begin(), dh_next.end(), 0.0);
                for (std::size_t r = 0; r < h4; ++r) {
                    const double d = dpre[r];
                    if (GB) GB[r] += d;
                    if (GWi)
                        for (std::size_t i = 0; i < in_dim; ++i) GWi[r * in_dim + i] += d * X[i * steps + tt];
                    if (GX)
                        for (std::size_t i = 0; i < in_dim; ++i) GX[i * steps + tt] += Wi[r * in_dim + i] * d;
                    if (hprev) {
                        const double* wh = Wh + r * hid;
                        if (GWh)
                            for (std::size_t k = 0; k < hid; ++k) GWh[r * hid + k] += d * hprev[k];
                        for (std::size_t k = 0; k < hid; ++k) dh_next[k] += wh[k] * d;
                    }
                }
            }
        });
}

}  // namespace panama::ad
