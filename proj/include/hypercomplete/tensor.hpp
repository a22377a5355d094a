#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hc {

// Raised when operand shapes do not fit an operation.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a value-level precondition is violated (non-positive delta,
// non-scalar loss, empty input, ...).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

// Counter-based deterministic generator (splitmix64). Identical seed gives an
// identical sample sequence on every platform; uniform() uses only integer
// arithmetic plus one exact power-of-two multiply.
class Rng {
   public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    int64_t next_index(int64_t n) {
        return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
    }

   private:
    uint64_t state_;
};

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated on first accumulation
    bool requires_grad = false;
    bool backward_ran = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
};

void ensure_grad(Node& n);

}  // namespace detail

// Dense row-major f64 tensor with an optional reverse-mode tape. Values are
// immutable once produced by an op; leaves may be mutated in place between
// recordings (optimizer updates).
class Tensor {
   public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor scalar(double v);
    static Tensor from_data(Shape shape, std::vector<double> data);
    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    size_t ndim() const { return shape().size(); }
    int64_t dim(size_t i) const;
    int64_t numel() const;
    int64_t rows() const { return dim(0); }
    int64_t cols() const { return dim(1); }

    std::span<const double> values() const;
    std::span<double> values_mut();  // leaf mutation between recordings
    double item() const;
    double at(int64_t i) const { return values()[static_cast<size_t>(i)]; }

    Tensor& set_requires_grad(bool on = true);
    bool requires_grad() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();

    // Reverse pass from a scalar loss. Errors on non-scalar tensors, on
    // untracked graphs, and on a second call for the same recording.
    void backward() const;

    // Same values, detached from the tape.
    Tensor detach() const;

    const std::shared_ptr<detail::Node>& node() const { return node_; }

   private:
    std::shared_ptr<detail::Node> node_;
};

// Tape switch. Ops record backward closures only while enabled.
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
    NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
    ~NoGradGuard() { set_grad_enabled(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    bool prev_;
};

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sqrt(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);     // [p,q] x [q,r] -> [p,r]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [p,q] x [r,q] -> [p,r]

// ---- reductions ----
Tensor sum(const Tensor& a);   // -> scalar, shape {}
Tensor mean(const Tensor& a);  // -> scalar, shape {}

// ---- shape & indexing ----
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& a, int64_t begin, int64_t end);
Tensor gather_rows(const Tensor& a, std::span<const int64_t> idx);
Tensor broadcast_row(const Tensor& v, int64_t n_rows);  // [C] -> [n,C]
Tensor repeat_rows_each(const Tensor& a, int64_t k);    // [n,C] -> [n*k,C], row-wise
Tensor add_rowvec(const Tensor& x, const Tensor& v);    // [R,C] + [C]

bool all_finite(const Tensor& a);

}  // namespace hc
