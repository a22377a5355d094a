#pragma once

#include "hypercomplete/tensor.hpp"

namespace hc {

// Dense affine map y = x W^T + b with W stored [out,in].
struct LinearLayer {
    Tensor weight;  // [out,in]
    Tensor bias;    // [out], may be undefined

    LinearLayer() = default;

    // uniform(-1/sqrt(in), 1/sqrt(in)) init, the documented reproducible scheme.
    static LinearLayer init(int64_t in, int64_t out, Rng& rng, bool with_bias = true);
    static LinearLayer zeros(int64_t in, int64_t out, bool with_bias = true);

    int64_t in_features() const { return weight.dim(1); }
    int64_t out_features() const { return weight.dim(0); }
};

// x: [in] or [R,in]; result keeps the leading shape.
Tensor linear(const Tensor& x, const LinearLayer& layer);

struct LayerNorm {
    Tensor gain;   // [C]
    Tensor shift;  // [C]
    double eps = 1e-5;

    static LayerNorm init(int64_t c, double eps = 1e-5);
};

// Per-row standardization followed by the affine gain/shift.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps);
inline Tensor layer_norm(const Tensor& x, const LayerNorm& ln) {
    return layer_norm(x, ln.gain, ln.shift, ln.eps);
}

// Per-channel causal convolution along rows, left zero-padded by k-1.
// kernels: [C,k] ordered oldest tap first; kernels[:,k-1] multiplies x[t].
Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernels);

// Columnwise max over all rows; gradient routes to the first argmax.
Tensor max_pool_rows(const Tensor& x);

// [G*K, C] -> [G, C], columnwise max inside each contiguous group of K rows.
Tensor max_pool_groups(const Tensor& x, int64_t group);

// Row-stochastic softmax along the last dimension of a 2-d tensor.
Tensor softmax_rows(const Tensor& x);

// out[l*N+n, :] = w[l,n] * p[n, :] — attention weights applied to per-point
// values while keeping the (anchor, point) pairs separate.
Tensor outer_scale(const Tensor& w, const Tensor& p);

// Grid-feature affine of the deformation block: rows come in G groups of K;
// each group is standardized by its own per-channel mean and std (std floored
// at sigma_floor), scaled by the global alpha and shifted by that group's
// lambda row.
Tensor grid_affine(const Tensor& grid, const Tensor& alpha, const Tensor& lambda,
                   int64_t group, double sigma_floor);

// Stack of LinearLayers with silu between (not after the last).
struct Mlp {
    std::vector<LinearLayer> layers;

    static Mlp init(std::span<const int64_t> widths, Rng& rng, bool with_bias = true);
    Tensor forward(const Tensor& x) const;
    // Zero the final layer so the map starts as the constant bias (zero).
    void zero_last_layer();
};

// Named parameter registry used by the optimizer and the checkpoint writer.
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

void collect(NamedParams& out, const std::string& name, const Tensor& t);
void collect(NamedParams& out, const std::string& prefix, const LinearLayer& l);
void collect(NamedParams& out, const std::string& prefix, const LayerNorm& ln);
void collect(NamedParams& out, const std::string& prefix, const Mlp& m);

int64_t param_count(const NamedParams& params);

}  // namespace hc
