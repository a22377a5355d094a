#pragma once

#include "hypercomplete/nn.hpp"
#include "hypercomplete/tensor.hpp"

namespace hc {

// Per-block selective state-space parameters. The diagonal state matrix is
// parameterized as A = -exp(a_log), which keeps it strictly negative, and the
// per-step Delta goes through softplus so it stays strictly positive.
struct SsmParams {
    Tensor a_log;           // [C,S]
    LinearLayer delta_proj;  // C -> C, bias initialized so softplus(bias) lands in [dt_min, dt_max]
    LinearLayer b_proj;      // C -> S
    LinearLayer c_proj;      // C -> S
    Tensor conv;            // [C,k] depthwise kernels
    LinearLayer in_proj;     // outer width -> C
    LinearLayer out_proj;    // C -> outer width
    bool exact_zoh = false;  // exact (exp(dA)-1)/A * B instead of d*B

    static SsmParams init(int64_t outer, int64_t inner, int64_t state, int64_t conv_k, Rng& rng,
                          double dt_min = 1e-3, double dt_max = 1e-1);

    int64_t channels() const { return a_log.dim(0); }
    int64_t state_size() const { return a_log.dim(1); }

    void collect_params(NamedParams& out, const std::string& prefix) const;
};

// Zero-order-hold discretization of diagonal dynamics: a_bar = exp(delta*a),
// b_bar = delta*b (simplified) or (exp(delta*a)-1)/a * b (exact). delta is
// per channel [C], a is [C,S], b is [S]; both results are [C,S]. Value-level.
std::pair<Tensor, Tensor> discretize_zoh(const Tensor& delta, const Tensor& a, const Tensor& b,
                                         bool exact = false);

// The time-varying recurrence h_t = a_bar_t ⊙ h_{t-1} + b_bar_t x_t,
// y_t = <c_t, h_t> evaluated chunk-wise. Differentiable in every argument.
//   x [len,C], delta [len,C] (>0), b [len,S], c [len,S], a_log [C,S]
Tensor scan_core(const Tensor& x, const Tensor& delta, const Tensor& b, const Tensor& c,
                 const Tensor& a_log, bool exact_zoh = false);

// Full selective scan: Delta/B/C are functions of the current input.
Tensor selective_scan(const Tensor& x, const SsmParams& params);

// Mamba block: z' = DW(MLP(LN(z))); z'' = MLP(LN(SSM(silu(z')))); output
// z'' ⊙ silu(LN(z)) + z. Outer width stays fixed; the conv/scan run at the
// expanded inner width.
class MambaBlock {
   public:
    MambaBlock() = default;
    static MambaBlock init(int64_t width, int64_t expand, int64_t state, int64_t conv_k, Rng& rng);

    Tensor forward(const Tensor& z) const;
    int64_t width() const { return width_; }

    void collect_params(NamedParams& out, const std::string& prefix) const;

    SsmParams ssm;
    LayerNorm ln_in, ln_mid, ln_gate;

   private:
    int64_t width_ = 0;
};

// Sequential mamba blocks with an interleaved MLP + residual after each.
class MambaStack {
   public:
    MambaStack() = default;
    static MambaStack init(int64_t width, int64_t depth, int64_t expand, int64_t state,
                           int64_t conv_k, Rng& rng);

    Tensor forward(const Tensor& z) const;
    int64_t depth() const { return static_cast<int64_t>(blocks_.size()); }

    void collect_params(NamedParams& out, const std::string& prefix) const;

   private:
    std::vector<MambaBlock> blocks_;
    std::vector<Mlp> mlps_;
};

namespace testing {
// Self-test hook: perturbs the first scan output so the scan-equivalence
// check must fail. Never set outside negative-control tests.
void set_corrupt_scan(bool on);
bool corrupt_scan();
}  // namespace testing

}  // namespace hc
