#include "hypercomplete/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace hc {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "]";
    return os.str();
}

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

namespace detail {

void ensure_grad(Node& n) {
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
}

}  // namespace detail

using detail::ensure_grad;
using detail::Node;
using NodePtr = std::shared_ptr<Node>;

namespace {

thread_local bool g_grad_enabled = true;

NodePtr make_leaf(Shape shape, std::vector<double> value) {
    if (shape_numel(shape) != static_cast<int64_t>(value.size())) {
        throw ShapeError("tensor data length " + std::to_string(value.size()) +
                         " does not match shape " + shape_str(shape));
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    return n;
}

Tensor make_op(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
               std::function<void(Node&)> backward_fn) {
    auto n = make_leaf(std::move(shape), std::move(value));
    bool track = false;
    if (g_grad_enabled) {
        for (const auto& p : parents) track = track || p->requires_grad;
    }
    if (track) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor(n);
}

void check_defined(const Tensor& t, const char* what) {
    if (!t.defined()) throw ContractError(std::string(what) + ": undefined tensor");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

void check_2d(const Tensor& t, const char* op) {
    if (t.ndim() != 2) {
        throw ShapeError(std::string(op) + ": expected 2-d tensor, got " + shape_str(t.shape()));
    }
}

// Elementwise unary: f(value) and df(value) evaluated from the stored input.
Tensor unary_op(const Tensor& a, double (*f)(double), double (*df)(double), const char* name) {
    check_defined(a, name);
    auto av = a.values();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
    NodePtr an = a.node();
    return make_op(a.shape(), std::move(out), {an}, [an, df](Node& self) {
        ensure_grad(*an);
        for (size_t i = 0; i < self.grad.size(); ++i) {
            an->grad[i] += self.grad[i] * df(an->value[i]);
        }
    });
}

double sigmoid_v(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double silu_v(double x) { return x * sigmoid_v(x); }
double dsilu_v(double x) {
    double s = sigmoid_v(x);
    return s * (1.0 + x * (1.0 - s));
}
double dsigmoid_v(double x) {
    double s = sigmoid_v(x);
    return s * (1.0 - s);
}
// Overflow-safe: softplus(x) = max(x,0) + log1p(exp(-|x|)).
double softplus_v(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double exp_v(double x) { return std::exp(x); }
double sqrt_v(double x) { return std::sqrt(x); }
double dsqrt_v(double x) { return 0.5 / std::sqrt(x); }

}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

// ---- Tensor basics ----

Tensor Tensor::zeros(Shape shape) {
    int64_t n = shape_numel(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0)));
}

Tensor Tensor::full(Shape shape, double v) {
    int64_t n = shape_numel(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(static_cast<size_t>(n), v)));
}

Tensor Tensor::scalar(double v) { return Tensor(make_leaf({}, {v})); }

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
    return Tensor(make_leaf(std::move(shape), std::move(data)));
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi) {
    int64_t n = shape_numel(shape);
    std::vector<double> data(static_cast<size_t>(n));
    for (auto& v : data) v = rng.uniform(lo, hi);
    return Tensor(make_leaf(std::move(shape), std::move(data)));
}

const Shape& Tensor::shape() const {
    if (!node_) throw ContractError("shape(): undefined tensor");
    return node_->shape;
}

int64_t Tensor::dim(size_t i) const {
    const Shape& s = shape();
    if (i >= s.size()) throw ShapeError("dim(): index out of range for " + shape_str(s));
    return s[i];
}

int64_t Tensor::numel() const { return static_cast<int64_t>(values().size()); }

std::span<const double> Tensor::values() const {
    if (!node_) throw ContractError("values(): undefined tensor");
    return node_->value;
}

std::span<double> Tensor::values_mut() {
    if (!node_) throw ContractError("values_mut(): undefined tensor");
    return node_->value;
}

double Tensor::item() const {
    auto v = values();
    if (v.size() != 1) throw ContractError("item(): tensor has " + std::to_string(v.size()) + " elements");
    return v[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
    if (!node_) throw ContractError("set_requires_grad(): undefined tensor");
    node_->requires_grad = on;
    return *this;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!node_ || node_->grad.empty()) {
        throw ContractError("grad(): no gradient recorded for this tensor");
    }
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::detach() const {
    if (!node_) return Tensor();
    return Tensor(make_leaf(node_->shape, node_->value));
}

void Tensor::backward() const {
    if (!node_) throw ContractError("backward(): undefined tensor");
    if (node_->value.size() != 1) {
        throw ContractError("backward(): loss must be a scalar, got shape " + shape_str(node_->shape));
    }
    if (!node_->requires_grad) {
        throw ContractError("backward(): loss is not connected to any tracked tensor");
    }
    if (node_->backward_ran) {
        throw ContractError("backward(): already ran for this recording; rebuild the forward pass");
    }

    // Iterative postorder over the requires_grad subgraph.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* n;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({node_.get(), 0});
    visited.insert(node_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.n->parents.size()) {
            Node* p = f.n->parents[f.next_parent++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }

    node_->grad.assign(1, 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
    node_->backward_ran = true;
}

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    check_defined(a, "add");
    check_defined(b, "add");
    check_same_shape(a, b, "add");
    auto av = a.values(), bv = b.values();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    NodePtr an = a.node(), bn = b.node();
    return make_op(a.shape(), std::move(out), {an, bn}, [an, bn](Node& self) {
        if (an->requires_grad) {
            ensure_grad(*an);
            for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            ensure_grad(*bn);
            for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_defined(a, "sub");
    check_defined(b, "sub");
    check_same_shape(a, b, "sub");
    auto av = a.values(), bv = b.values();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
    NodePtr an = a.node(), bn = b.node();
    return make_op(a.shape(), std::move(out), {an, bn}, [an, bn](Node& self) {
        if (an->requires_grad) {
            ensure_grad(*an);
            for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            ensure_grad(*bn);
            for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_defined(a, "mul");
    check_defined(b, "mul");
    check_same_shape(a, b, "mul");
    auto av = a.values(), bv = b.values();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
    NodePtr an = a.node(), bn = b.node();
    return make_op(a.shape(), std::move(out), {an, bn}, [an, bn](Node& self) {
        if (an->requires_grad) {
            ensure_grad(*an);
            for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            ensure_grad(*bn);
            for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->value[i];
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    check_defined(a, "scale");
    auto av = a.values();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * s;
    NodePtr an = a.node();
    return make_op(a.shape(), std::move(out), {an}, [an, s](Node& self) {
        ensure_grad(*an);
        for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * s;
    });
}

Tensor add_scalar(const Tensor& a, double s) {
    check_defined(a, "add_scalar");
    auto av = a.values();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + s;
    NodePtr an = a.node();
    return make_op(a.shape(), std::move(out), {an}, [an](Node& self) {
        ensure_grad(*an);
        for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor silu(const Tensor& a) { return unary_op(a, silu_v, dsilu_v, "silu"); }
Tensor sigmoid(const Tensor& a) { return unary_op(a, sigmoid_v, dsigmoid_v, "sigmoid"); }
Tensor softplus(const Tensor& a) { return unary_op(a, softplus_v, sigmoid_v, "softplus"); }
Tensor exp(const Tensor& a) { return unary_op(a, exp_v, exp_v, "exp"); }
Tensor sqrt(const Tensor& a) { return unary_op(a, sqrt_v, dsqrt_v, "sqrt"); }

// ---- linear algebra ----

namespace {

// out[p,r] += a[p,q] * b[q,r] laid out row-major; plain loops, deterministic order.
void mm_acc(const double* a, const double* b, double* out, int64_t p, int64_t q, int64_t r) {
    for (int64_t i = 0; i < p; ++i) {
        const double* arow = a + i * q;
        double* orow = out + i * r;
        for (int64_t k = 0; k < q; ++k) {
            double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b + k * r;
            for (int64_t j = 0; j < r; ++j) orow[j] += aik * brow[j];
        }
    }
}

// out[p,r] += a[p,q] * b[r,q]^T — rows of both operands are contiguous.
void mm_nt_acc(const double* a, const double* b, double* out, int64_t p, int64_t q, int64_t r) {
    for (int64_t i = 0; i < p; ++i) {
        const double* arow = a + i * q;
        double* orow = out + i * r;
        for (int64_t j = 0; j < r; ++j) {
            const double* brow = b + j * q;
            double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
            int64_t k = 0;
            for (; k + 4 <= q; k += 4) {
                s0 += arow[k] * brow[k];
                s1 += arow[k + 1] * brow[k + 1];
                s2 += arow[k + 2] * brow[k + 2];
                s3 += arow[k + 3] * brow[k + 3];
            }
            double s = (s0 + s1) + (s2 + s3);
            for (; k < q; ++k) s += arow[k] * brow[k];
            orow[j] += s;
        }
    }
}

// out[p,r] += a[q,p]^T * b[q,r]
void mm_tn_acc(const double* a, const double* b, double* out, int64_t p, int64_t q, int64_t r) {
    for (int64_t k = 0; k < q; ++k) {
        const double* arow = a + k * p;
        const double* brow = b + k * r;
        for (int64_t i = 0; i < p; ++i) {
            double aki = arow[i];
            if (aki == 0.0) continue;
            double* orow = out + i * r;
            for (int64_t j = 0; j < r; ++j) orow[j] += aki * brow[j];
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_defined(a, "matmul");
    check_defined(b, "matmul");
    check_2d(a, "matmul");
    check_2d(b, "matmul");
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    int64_t p = a.rows(), q = a.cols(), r = b.cols();
    std::vector<double> out(static_cast<size_t>(p * r), 0.0);
    mm_acc(a.values().data(), b.values().data(), out.data(), p, q, r);
    NodePtr an = a.node(), bn = b.node();
    return make_op({p, r}, std::move(out), {an, bn}, [an, bn, p, q, r](Node& self) {
        if (an->requires_grad) {
            ensure_grad(*an);
            // dA = dY * B^T
            mm_nt_acc(self.grad.data(), bn->value.data(), an->grad.data(), p, r, q);
        }
        if (bn->requires_grad) {
            ensure_grad(*bn);
            // dB = A^T * dY
            mm_tn_acc(an->value.data(), self.grad.data(), bn->grad.data(), q, p, r);
        }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_defined(a, "matmul_nt");
    check_defined(b, "matmul_nt");
    check_2d(a, "matmul_nt");
    check_2d(b, "matmul_nt");
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + "^T");
    }
    int64_t p = a.rows(), q = a.cols(), r = b.rows();
    std::vector<double> out(static_cast<size_t>(p * r), 0.0);
    mm_nt_acc(a.values().data(), b.values().data(), out.data(), p, q, r);
    NodePtr an = a.node(), bn = b.node();
    return make_op({p, r}, std::move(out), {an, bn}, [an, bn, p, q, r](Node& self) {
        if (an->requires_grad) {
            ensure_grad(*an);
            // dA = dY * B
            mm_acc(self.grad.data(), bn->value.data(), an->grad.data(), p, r, q);
        }
        if (bn->requires_grad) {
            ensure_grad(*bn);
            // dB = dY^T * A
            mm_tn_acc(self.grad.data(), an->value.data(), bn->grad.data(), r, p, q);
        }
    });
}

// ---- reductions ----

Tensor sum(const Tensor& a) {
    check_defined(a, "sum");
    auto av = a.values();
    double s = 0.0;
    for (double v : av) s += v;
    NodePtr an = a.node();
    return make_op({}, {s}, {an}, [an](Node& self) {
        ensure_grad(*an);
        double g = self.grad[0];
        for (auto& gi : an->grad) gi += g;
    });
}

Tensor mean(const Tensor& a) {
    check_defined(a, "mean");
    if (a.numel() == 0) throw ContractError("mean(): empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

// ---- shape & indexing ----

Tensor reshape(const Tensor& a, Shape shape) {
    check_defined(a, "reshape");
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    std::vector<double> out(a.values().begin(), a.values().end());
    NodePtr an = a.node();
    return make_op(std::move(shape), std::move(out), {an}, [an](Node& self) {
        ensure_grad(*an);
        for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw ContractError("concat_rows: no inputs");
    for (const auto& t : parts) {
        check_defined(t, "concat_rows");
        check_2d(t, "concat_rows");
    }
    int64_t cols = parts[0].cols();
    int64_t total = 0;
    for (const auto& t : parts) {
        if (t.cols() != cols) {
            throw ShapeError("concat_rows: column mismatch " + shape_str(parts[0].shape()) +
                             " vs " + shape_str(t.shape()));
        }
        total += t.rows();
    }
    std::vector<double> out;
    out.reserve(static_cast<size_t>(total * cols));
    std::vector<NodePtr> parents;
    for (const auto& t : parts) {
        auto v = t.values();
        out.insert(out.end(), v.begin(), v.end());
        parents.push_back(t.node());
    }
    auto parents_copy = parents;
    return make_op({total, cols}, std::move(out), std::move(parents),
                   [parents_copy](Node& self) {
                       size_t off = 0;
                       for (const auto& p : parents_copy) {
                           size_t n = p->value.size();
                           if (p->requires_grad) {
                               ensure_grad(*p);
                               for (size_t i = 0; i < n; ++i) p->grad[i] += self.grad[off + i];
                           }
                           off += n;
                       }
                   });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    Tensor parts[2] = {a, b};
    return concat_rows(std::span<const Tensor>(parts, 2));
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    check_defined(a, "concat_cols");
    check_defined(b, "concat_cols");
    check_2d(a, "concat_cols");
    check_2d(b, "concat_cols");
    if (a.rows() != b.rows()) {
        throw ShapeError("concat_cols: row mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    int64_t n = a.rows(), ca = a.cols(), cb = b.cols();
    std::vector<double> out(static_cast<size_t>(n * (ca + cb)));
    auto av = a.values(), bv = b.values();
    for (int64_t i = 0; i < n; ++i) {
        std::copy_n(av.data() + i * ca, ca, out.data() + i * (ca + cb));
        std::copy_n(bv.data() + i * cb, cb, out.data() + i * (ca + cb) + ca);
    }
    NodePtr an = a.node(), bn = b.node();
    return make_op({n, ca + cb}, std::move(out), {an, bn}, [an, bn, n, ca, cb](Node& self) {
        if (an->requires_grad) {
            ensure_grad(*an);
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < ca; ++j)
                    an->grad[i * ca + j] += self.grad[i * (ca + cb) + j];
        }
        if (bn->requires_grad) {
            ensure_grad(*bn);
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < cb; ++j)
                    bn->grad[i * cb + j] += self.grad[i * (ca + cb) + ca + j];
        }
    });
}

Tensor slice_rows(const Tensor& a, int64_t begin, int64_t end) {
    check_defined(a, "slice_rows");
    check_2d(a, "slice_rows");
    if (begin < 0 || end > a.rows() || begin >= end) {
        throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for " + shape_str(a.shape()));
    }
    int64_t c = a.cols();
    auto av = a.values();
    std::vector<double> out(av.begin() + begin * c, av.begin() + end * c);
    NodePtr an = a.node();
    return make_op({end - begin, c}, std::move(out), {an}, [an, begin, c](Node& self) {
        ensure_grad(*an);
        for (size_t i = 0; i < self.grad.size(); ++i) {
            an->grad[static_cast<size_t>(begin * c) + i] += self.grad[i];
        }
    });
}

Tensor gather_rows(const Tensor& a, std::span<const int64_t> idx) {
    check_defined(a, "gather_rows");
    check_2d(a, "gather_rows");
    int64_t n = a.rows(), c = a.cols();
    for (int64_t i : idx) {
        if (i < 0 || i >= n) {
            throw ShapeError("gather_rows: index " + std::to_string(i) + " out of range for " +
                             shape_str(a.shape()));
        }
    }
    std::vector<double> out(idx.size() * static_cast<size_t>(c));
    auto av = a.values();
    for (size_t r = 0; r < idx.size(); ++r) {
        std::copy_n(av.data() + idx[r] * c, c, out.data() + static_cast<int64_t>(r) * c);
    }
    NodePtr an = a.node();
    std::vector<int64_t> idx_copy(idx.begin(), idx.end());
    return make_op({static_cast<int64_t>(idx.size()), c}, std::move(out), {an},
                   [an, idx_copy, c](Node& self) {
                       ensure_grad(*an);
                       for (size_t r = 0; r < idx_copy.size(); ++r) {
                           for (int64_t j = 0; j < c; ++j) {
                               an->grad[idx_copy[r] * c + j] +=
                                   self.grad[static_cast<int64_t>(r) * c + j];
                           }
                       }
                   });
}

Tensor broadcast_row(const Tensor& v, int64_t n_rows) {
    check_defined(v, "broadcast_row");
    if (v.ndim() != 1) throw ShapeError("broadcast_row: expected 1-d tensor, got " + shape_str(v.shape()));
    if (n_rows < 1) throw ContractError("broadcast_row: n_rows must be >= 1");
    int64_t c = v.dim(0);
    std::vector<double> out(static_cast<size_t>(n_rows * c));
    auto vv = v.values();
    for (int64_t i = 0; i < n_rows; ++i) std::copy_n(vv.data(), c, out.data() + i * c);
    NodePtr vn = v.node();
    return make_op({n_rows, c}, std::move(out), {vn}, [vn, n_rows, c](Node& self) {
        ensure_grad(*vn);
        for (int64_t i = 0; i < n_rows; ++i)
            for (int64_t j = 0; j < c; ++j) vn->grad[j] += self.grad[i * c + j];
    });
}

Tensor repeat_rows_each(const Tensor& a, int64_t k) {
    check_defined(a, "repeat_rows_each");
    check_2d(a, "repeat_rows_each");
    if (k < 1) throw ContractError("repeat_rows_each: k must be >= 1");
    int64_t n = a.rows(), c = a.cols();
    std::vector<double> out(static_cast<size_t>(n * k * c));
    auto av = a.values();
    for (int64_t i = 0; i < n; ++i)
        for (int64_t r = 0; r < k; ++r)
            std::copy_n(av.data() + i * c, c, out.data() + (i * k + r) * c);
    NodePtr an = a.node();
    return make_op({n * k, c}, std::move(out), {an}, [an, n, k, c](Node& self) {
        ensure_grad(*an);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t r = 0; r < k; ++r)
                for (int64_t j = 0; j < c; ++j)
                    an->grad[i * c + j] += self.grad[(i * k + r) * c + j];
    });
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    check_defined(x, "add_rowvec");
    check_defined(v, "add_rowvec");
    check_2d(x, "add_rowvec");
    if (v.ndim() != 1 || v.dim(0) != x.cols()) {
        throw ShapeError("add_rowvec: " + shape_str(x.shape()) + " + " + shape_str(v.shape()));
    }
    int64_t n = x.rows(), c = x.cols();
    std::vector<double> out(static_cast<size_t>(n * c));
    auto xv = x.values(), vv = v.values();
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] + vv[j];
    NodePtr xn = x.node(), vn = v.node();
    return make_op({n, c}, std::move(out), {xn, vn}, [xn, vn, n, c](Node& self) {
        if (xn->requires_grad) {
            ensure_grad(*xn);
            for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
        }
        if (vn->requires_grad) {
            ensure_grad(*vn);
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < c; ++j) vn->grad[j] += self.grad[i * c + j];
        }
    });
}

bool all_finite(const Tensor& a) {
    for (double v : a.values()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace hc
