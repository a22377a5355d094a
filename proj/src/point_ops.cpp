#include "hypercomplete/point_ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace hc {

PointCloud::PointCloud(Tensor pts) : points(std::move(pts)) {
    if (points.ndim() != 2 || points.cols() != 3) {
        throw ShapeError("PointCloud: expected [n,3], got " + shape_str(points.shape()));
    }
    if (points.rows() < 1) throw ContractError("PointCloud: needs at least one point");
    if (!all_finite(points)) throw ContractError("PointCloud: coordinates must be finite");
}

std::array<double, 3> PointCloud::at(int64_t i) const {
    auto v = points.values();
    return {v[i * 3 + 0], v[i * 3 + 1], v[i * 3 + 2]};
}

PointCloud make_cloud(std::vector<double> xyz) {
    int64_t n = static_cast<int64_t>(xyz.size()) / 3;
    return PointCloud(Tensor::from_data({n, 3}, std::move(xyz)));
}

namespace {

double sqdist3(const double* a, const double* b) {
    double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

}  // namespace

SampledSet fps(const PointCloud& cloud, int64_t n_s, int64_t start) {
    int64_t n = cloud.size();
    if (n_s < 1 || n_s > n) {
        throw ContractError("fps: sample count " + std::to_string(n_s) +
                            " out of range for cloud of " + std::to_string(n));
    }
    if (start < 0 || start >= n) {
        throw ContractError("fps: start index " + std::to_string(start) + " out of range");
    }
    const double* pts = cloud.points.values().data();

    std::vector<int64_t> picked;
    picked.reserve(static_cast<size_t>(n_s));
    std::vector<double> min_d(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
    int64_t cur = start;
    for (int64_t s = 0; s < n_s; ++s) {
        picked.push_back(cur);
        const double* p = pts + cur * 3;
        int64_t next = -1;
        double best = -1.0;
        for (int64_t i = 0; i < n; ++i) {
            double d = sqdist3(pts + i * 3, p);
            if (d < min_d[i]) min_d[i] = d;
            if (min_d[i] > best) {  // strict: lowest index wins ties
                best = min_d[i];
                next = i;
            }
        }
        cur = next;
    }

    SampledSet out;
    out.indices = std::move(picked);
    out.coords = gather_rows(cloud.points, out.indices);
    return out;
}

std::vector<std::vector<int64_t>> knn(const PointCloud& targets, const Tensor& queries, int64_t k) {
    if (queries.ndim() != 2 || queries.cols() != 3) {
        throw ShapeError("knn: queries must be [q,3], got " + shape_str(queries.shape()));
    }
    int64_t n = targets.size();
    if (k < 1 || k > n) {
        throw ContractError("knn: k=" + std::to_string(k) + " out of range for " +
                            std::to_string(n) + " targets");
    }
    const double* tp = targets.points.values().data();
    const double* qp = queries.values().data();
    int64_t q = queries.rows();

    std::vector<std::vector<int64_t>> result(static_cast<size_t>(q));
    std::vector<std::pair<double, int64_t>> dist(static_cast<size_t>(n));
    for (int64_t qi = 0; qi < q; ++qi) {
        for (int64_t i = 0; i < n; ++i) dist[i] = {sqdist3(tp + i * 3, qp + qi * 3), i};
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        auto& row = result[static_cast<size_t>(qi)];
        row.resize(static_cast<size_t>(k));
        for (int64_t j = 0; j < k; ++j) row[j] = dist[j].second;
    }
    return result;
}

Tensor pairwise_sqdist(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || a.cols() != 3 || b.ndim() != 2 || b.cols() != 3) {
        throw ShapeError("pairwise_sqdist: expected [p,3] and [q,3], got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    int64_t p = a.rows(), q = b.rows();
    const double* ap = a.values().data();
    const double* bp = b.values().data();
    std::vector<double> out(static_cast<size_t>(p * q));
    for (int64_t i = 0; i < p; ++i)
        for (int64_t j = 0; j < q; ++j) out[i * q + j] = sqdist3(ap + i * 3, bp + j * 3);
    return Tensor::from_data({p, q}, std::move(out));
}

EdgeConvParams EdgeConvParams::init(int64_t hidden, int64_t out, Rng& rng) {
    EdgeConvParams p;
    const int64_t widths[3] = {6, hidden, out};
    p.mlp = Mlp::init(widths, rng);
    return p;
}

Tensor edge_conv(const PointCloud& cloud, const SampledSet& samples, int64_t k,
                 const EdgeConvParams& params) {
    auto neighbors = knn(cloud, samples.coords, k);

    // Edge features for all samples in one [n_s*k, 6] batch, one shared MLP
    // pass, then a per-sample max over the k edges.
    std::vector<int64_t> flat;
    flat.reserve(neighbors.size() * static_cast<size_t>(k));
    for (auto& row : neighbors) flat.insert(flat.end(), row.begin(), row.end());

    Tensor neigh = gather_rows(cloud.points, flat);            // [n_s*k, 3]
    Tensor centers = repeat_rows_each(samples.coords, k);      // [n_s*k, 3]
    Tensor edges = concat_cols(sub(neigh, centers), centers);  // [n_s*k, 6]
    Tensor feats = params.mlp.forward(edges);                  // [n_s*k, C]
    return max_pool_groups(feats, k);                          // [n_s, C]
}

namespace {

// Skilling's transpose-to-index conversion, `bits` per axis.
uint64_t hilbert_index3(std::array<uint32_t, 3> x, int bits) {
    uint32_t m = 1u << (bits - 1);
    for (uint32_t q = m; q > 1; q >>= 1) {
        uint32_t p = q - 1;
        for (int i = 0; i < 3; ++i) {
            if (x[i] & q) {
                x[0] ^= p;
            } else {
                uint32_t t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
    }
    for (int i = 1; i < 3; ++i) x[i] ^= x[i - 1];
    uint32_t t = 0;
    for (uint32_t q = m; q > 1; q >>= 1) {
        if (x[2] & q) t ^= q - 1;
    }
    for (int i = 0; i < 3; ++i) x[i] ^= t;
    uint64_t key = 0;
    for (int b = bits - 1; b >= 0; --b) {
        for (int i = 0; i < 3; ++i) key = (key << 1) | ((x[i] >> b) & 1u);
    }
    return key;
}

}  // namespace

std::vector<int64_t> hilbert_order(const Tensor& coords) {
    if (coords.ndim() != 2 || coords.cols() != 3) {
        throw ShapeError("hilbert_order: expected [n,3], got " + shape_str(coords.shape()));
    }
    constexpr int kBits = 10;
    int64_t n = coords.rows();
    const double* p = coords.values().data();
    double lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
        lo[a] = std::numeric_limits<double>::infinity();
        hi[a] = -std::numeric_limits<double>::infinity();
    }
    for (int64_t i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[i * 3 + a]);
            hi[a] = std::max(hi[a], p[i * 3 + a]);
        }
    double scale[3];
    for (int a = 0; a < 3; ++a) {
        double span = hi[a] - lo[a];
        scale[a] = span > 0 ? ((1 << kBits) - 1) / span : 0.0;
    }
    std::vector<std::pair<uint64_t, int64_t>> keyed(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        std::array<uint32_t, 3> q;
        for (int a = 0; a < 3; ++a) {
            q[a] = static_cast<uint32_t>((p[i * 3 + a] - lo[a]) * scale[a] + 0.5);
        }
        keyed[static_cast<size_t>(i)] = {hilbert_index3(q, kBits), i};
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = keyed[static_cast<size_t>(i)].second;
    return order;
}

}  // namespace hc
