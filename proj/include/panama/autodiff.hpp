#pragma once

// Dense double-precision tensors with tape-based reverse-mode differentiation.
//
// A Graph records every operation in creation order, so node ids are already a
// topological order. backward() walks ids from the root down to zero, invoking
// each node's adjoint once. Graphs are rebuilt for every forward pass; model
// parameters live outside the graph as plain Arrays and are bound as leaves.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace panama::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Plain dense row-major array. Rank 0 (empty shape) is a scalar.
struct Array {
    Shape shape;
    std::vector<double> data;

    Array() = default;
    explicit Array(Shape s, double fill = 0.0);
    Array(Shape s, std::vector<double> values);

    static Array scalar(double v) { return Array(Shape{}, std::vector<double>{v}); }
    static Array vector(std::vector<double> values);
    static Array matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }
    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    bool all_finite() const;
};

class Graph;

/// Handle to a node in a Graph. Cheap to copy; only valid while its Graph lives.
class Var {
public:
    Var() = default;

    bool valid() const { return graph_ != nullptr; }
    Graph& graph() const { return *graph_; }
    std::uint32_t id() const { return id_; }

    const Array& value() const;
    const Shape& shape() const;
    std::size_t size() const;
    bool requires_grad() const;
    /// Gradient after backward(); zeros for leaves not on any path to the root.
    const std::vector<double>& grad() const;
    double item() const;

private:
    friend class Graph;
    Var(Graph* g, std::uint32_t id) : graph_(g), id_(id) {}

    Graph* graph_ = nullptr;
    std::uint32_t id_ = 0;
};

class Graph {
public:
    using Adjoint = std::function<void(Graph&, std::uint32_t self)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var leaf(Array value, bool requires_grad = true);
    Var constant(Array value) { return leaf(std::move(value), false); }

    /// Records an op result. The node requires grad iff any input does; the
    /// adjoint is dropped otherwise.
    Var record(Array value, std::initializer_list<Var> inputs, Adjoint adjoint);
    Var record(Array value, const std::vector<Var>& inputs, Adjoint adjoint);

    /// True when some input requires grad, i.e. an op should keep backward state.
    static bool any_requires_grad(std::initializer_list<Var> inputs);

    void backward(Var root);
    void zero_grad();

    std::size_t size() const { return nodes_.size(); }
    const Array& value(std::uint32_t id) const { return nodes_[id].value; }
    bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
    const std::vector<double>& grad(std::uint32_t id) const;
    /// Mutable gradient accumulator for use inside adjoints.
    std::vector<double>& grad_acc(std::uint32_t id);

private:
    struct Node {
        Array value;
        std::vector<double> grad;
        bool requires_grad = false;
        Adjoint adjoint;
    };

    Var push(Node node);

    std::vector<Node> nodes_;
    std::vector<double> empty_;
};

// ---------------------------------------------------------------------------
// Elementwise arithmetic. Binary ops require identical shapes.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator+(Var a, double s) { return add_scalar(a, s); }
inline Var operator-(Var a) { return neg(a); }

Var tanh(Var a);
Var sigmoid(Var a);
Var log(Var a);
Var exp(Var a);
Var abs(Var a);
Var square(Var a);
/// max(a, floor); gradient flows only where a > floor.
Var clamp_floor(Var a, double floor);

// ---------------------------------------------------------------------------
// Shape manipulation.

Var reshape(Var a, Shape shape);
/// [D] -> [D x T], repeating the vector along time.
Var broadcast_time(Var v, std::size_t steps);
/// series [D x T] + v [D] broadcast over time.
Var add_time_broadcast(Var series, Var v);
/// Concatenates along the leading axis. Rank-1 inputs are joined end to end;
/// rank-2 inputs must agree on column count.
Var concat(const std::vector<Var>& parts);
/// Slices [begin, begin+length) along the last axis.
Var slice(Var a, std::size_t begin, std::size_t length);

// ---------------------------------------------------------------------------
// Linear algebra and reductions.

/// [m x n] * [n x p]. Zero entries of the left operand are skipped, which makes
/// banded constants like mel filterbanks cheap.
Var matmul(Var a, Var b);
Var sum(Var a);
Var mean(Var a);

/// Dilated 1-D convolution. input [C_in x T], kernel [C_out x C_in x K].
/// out[o][t] = sum_{i,j} kernel[o][i][j] * input[i][t - dilation*(K-1-j)].
/// With causal_pad the input is left-padded with dilation*(K-1) zeros and the
/// output keeps length T; otherwise the output has length T - dilation*(K-1).
Var conv1d_dilated(Var input, Var kernel, std::size_t dilation, bool causal_pad = true);

/// One LSTM layer over a whole sequence with zero initial state.
/// input [I x T], w_ih [4H x I], w_hh [4H x H], bias [4H]. Gate order i, f, g, o.
/// Returns hidden states [H x T].
Var lstm_layer(Var input, Var w_ih, Var w_hh, Var bias);

}  // namespace panama::ad
