#pragma once

#include "hypercomplete/nn.hpp"
#include "hypercomplete/tensor.hpp"

namespace hc {

// Ordered list of 3-d coordinates, [n,3].
struct PointCloud {
    Tensor points;

    PointCloud() = default;
    explicit PointCloud(Tensor pts);

    int64_t size() const { return points.rows(); }
    // (x,y,z) of point i
    std::array<double, 3> at(int64_t i) const;
};

PointCloud make_cloud(std::vector<double> xyz);

// FPS result: selection-order indices into the parent cloud plus their coords.
struct SampledSet {
    std::vector<int64_t> indices;
    Tensor coords;  // [n_s,3], gathered from the parent (differentiable)
};

// Greedy max-min farthest point sampling; first point is `start`, distance
// ties broken by lowest index.
SampledSet fps(const PointCloud& cloud, int64_t n_s, int64_t start = 0);

// For each query row, indices of the k nearest targets, ascending by
// Euclidean distance, ties by lower index. Result is [q][k].
std::vector<std::vector<int64_t>> knn(const PointCloud& targets, const Tensor& queries, int64_t k);

// Squared Euclidean distances, [p,q]. Value-level (no tape).
Tensor pairwise_sqdist(const Tensor& a, const Tensor& b);

// DGCNN-style EdgeConv: per sampled point gather k neighbors in the full
// cloud (self included), apply the shared MLP to [x_j - x_i ; x_i] and
// max-aggregate over the k edges.
struct EdgeConvParams {
    Mlp mlp;  // 6 -> hidden -> C

    static EdgeConvParams init(int64_t hidden, int64_t out, Rng& rng);
};

Tensor edge_conv(const PointCloud& cloud, const SampledSet& samples, int64_t k,
                 const EdgeConvParams& params);

// Permutation that orders rows of [n,3] coords along a 3-d Hilbert curve over
// the bounding box (10 bits per axis, ties by index).
std::vector<int64_t> hilbert_order(const Tensor& coords);

}  // namespace hc
