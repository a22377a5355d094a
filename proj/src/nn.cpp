#include "hypercomplete/nn.hpp"

#include <algorithm>
#include <cmath>

namespace hc {

using detail::ensure_grad;
using detail::Node;
using NodePtr = std::shared_ptr<Node>;

namespace {

Tensor make_op(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
               std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    if (shape_numel(n->shape) != static_cast<int64_t>(value.size())) {
        throw ShapeError("internal: op value size does not match shape " + shape_str(n->shape));
    }
    n->value = std::move(value);
    bool track = false;
    if (grad_enabled()) {
        for (const auto& p : parents) track = track || p->requires_grad;
    }
    if (track) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor(n);
}

void check_2d(const Tensor& t, const char* op) {
    if (!t.defined() || t.ndim() != 2) {
        throw ShapeError(std::string(op) + ": expected 2-d tensor" +
                         (t.defined() ? ", got " + shape_str(t.shape()) : ""));
    }
}

}  // namespace

LinearLayer LinearLayer::init(int64_t in, int64_t out, Rng& rng, bool with_bias) {
    if (in < 1 || out < 1) throw ContractError("LinearLayer: in/out must be >= 1");
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    LinearLayer l;
    l.weight = Tensor::uniform({out, in}, rng, -bound, bound).set_requires_grad();
    if (with_bias) l.bias = Tensor::uniform({out}, rng, -bound, bound).set_requires_grad();
    return l;
}

LinearLayer LinearLayer::zeros(int64_t in, int64_t out, bool with_bias) {
    LinearLayer l;
    l.weight = Tensor::zeros({out, in}).set_requires_grad();
    if (with_bias) l.bias = Tensor::zeros({out}).set_requires_grad();
    return l;
}

Tensor linear(const Tensor& x, const LinearLayer& layer) {
    if (!x.defined() || !layer.weight.defined()) {
        throw ContractError("linear: undefined input or layer");
    }
    bool vec_in = x.ndim() == 1;
    if (!vec_in && x.ndim() != 2) {
        throw ShapeError("linear: expected 1-d or 2-d input, got " + shape_str(x.shape()));
    }
    int64_t in = layer.weight.dim(1), out = layer.weight.dim(0);
    int64_t last = vec_in ? x.dim(0) : x.cols();
    if (last != in) {
        throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(layer.weight.shape()));
    }
    int64_t rows = vec_in ? 1 : x.rows();
    const double* xd = x.values().data();
    const double* wd = layer.weight.values().data();
    std::vector<double> y(static_cast<size_t>(rows * out), 0.0);
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = xd + r * in;
        double* yr = y.data() + r * out;
        for (int64_t o = 0; o < out; ++o) {
            const double* wr = wd + o * in;
            double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
            int64_t k = 0;
            for (; k + 4 <= in; k += 4) {
                s0 += xr[k] * wr[k];
                s1 += xr[k + 1] * wr[k + 1];
                s2 += xr[k + 2] * wr[k + 2];
                s3 += xr[k + 3] * wr[k + 3];
            }
            double s = (s0 + s1) + (s2 + s3);
            for (; k < in; ++k) s += xr[k] * wr[k];
            yr[o] = s;
        }
        if (layer.bias.defined()) {
            const double* bd = layer.bias.values().data();
            for (int64_t o = 0; o < out; ++o) yr[o] += bd[o];
        }
    }

    NodePtr xn = x.node(), wn = layer.weight.node();
    NodePtr bn = layer.bias.defined() ? layer.bias.node() : nullptr;
    std::vector<NodePtr> parents = {xn, wn};
    if (bn) parents.push_back(bn);
    Shape out_shape = vec_in ? Shape{out} : Shape{rows, out};
    return make_op(std::move(out_shape), std::move(y), std::move(parents),
                   [xn, wn, bn, rows, in, out](Node& self) {
                       const double* gy = self.grad.data();
                       if (xn->requires_grad) {
                           ensure_grad(*xn);
                           // dx[r,:] += sum_o gy[r,o] * W[o,:]
                           for (int64_t r = 0; r < rows; ++r) {
                               double* gx = xn->grad.data() + r * in;
                               for (int64_t o = 0; o < out; ++o) {
                                   double g = gy[r * out + o];
                                   if (g == 0.0) continue;
                                   const double* wr = wn->value.data() + o * in;
                                   for (int64_t k = 0; k < in; ++k) gx[k] += g * wr[k];
                               }
                           }
                       }
                       if (wn->requires_grad) {
                           ensure_grad(*wn);
                           for (int64_t r = 0; r < rows; ++r) {
                               const double* xr = xn->value.data() + r * in;
                               for (int64_t o = 0; o < out; ++o) {
                                   double g = gy[r * out + o];
                                   if (g == 0.0) continue;
                                   double* gw = wn->grad.data() + o * in;
                                   for (int64_t k = 0; k < in; ++k) gw[k] += g * xr[k];
                               }
                           }
                       }
                       if (bn && bn->requires_grad) {
                           ensure_grad(*bn);
                           for (int64_t r = 0; r < rows; ++r)
                               for (int64_t o = 0; o < out; ++o) bn->grad[o] += gy[r * out + o];
                       }
                   });
}

LayerNorm LayerNorm::init(int64_t c, double eps) {
    if (c < 1) throw ShapeError("LayerNorm: channel count must be >= 1");
    LayerNorm ln;
    ln.gain = Tensor::full({c}, 1.0).set_requires_grad();
    ln.shift = Tensor::zeros({c}).set_requires_grad();
    ln.eps = eps;
    return ln;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
    bool vec_in = x.defined() && x.ndim() == 1;
    if (!vec_in) check_2d(x, "layer_norm");
    int64_t rows = vec_in ? 1 : x.rows();
    int64_t c = vec_in ? x.dim(0) : x.cols();
    if (c < 1) throw ShapeError("layer_norm: channel count must be >= 1");
    if (eps <= 0.0) throw ContractError("layer_norm: eps must be positive");
    if (gain.numel() != c || shift.numel() != c) {
        throw ShapeError("layer_norm: gain/shift " + shape_str(gain.shape()) + "/" +
                         shape_str(shift.shape()) + " do not match channels " + std::to_string(c));
    }

    const double* xd = x.values().data();
    const double* gd = gain.values().data();
    const double* sd = shift.values().data();
    std::vector<double> y(static_cast<size_t>(rows * c));
    std::vector<double> xhat(static_cast<size_t>(rows * c));
    std::vector<double> inv_std(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = xd + r * c;
        double mu = 0.0;
        for (int64_t j = 0; j < c; ++j) mu += xr[j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            double d = xr[j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(c);
        double inv = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(r)] = inv;
        for (int64_t j = 0; j < c; ++j) {
            double h = (xr[j] - mu) * inv;
            xhat[r * c + j] = h;
            y[r * c + j] = h * gd[j] + sd[j];
        }
    }

    NodePtr xn = x.node(), gn = gain.node(), sn = shift.node();
    Shape out_shape = vec_in ? Shape{c} : Shape{rows, c};
    return make_op(std::move(out_shape), std::move(y), {xn, gn, sn},
                   [xn, gn, sn, rows, c, xhat = std::move(xhat),
                    inv_std = std::move(inv_std)](Node& self) {
                       const double* gy = self.grad.data();
                       if (gn->requires_grad) {
                           ensure_grad(*gn);
                           for (int64_t r = 0; r < rows; ++r)
                               for (int64_t j = 0; j < c; ++j)
                                   gn->grad[j] += gy[r * c + j] * xhat[r * c + j];
                       }
                       if (sn->requires_grad) {
                           ensure_grad(*sn);
                           for (int64_t r = 0; r < rows; ++r)
                               for (int64_t j = 0; j < c; ++j) sn->grad[j] += gy[r * c + j];
                       }
                       if (xn->requires_grad) {
                           ensure_grad(*xn);
                           for (int64_t r = 0; r < rows; ++r) {
                               double m1 = 0.0, m2 = 0.0;  // mean(dh), mean(dh*xhat)
                               for (int64_t j = 0; j < c; ++j) {
                                   double dh = gy[r * c + j] * gn->value[j];
                                   m1 += dh;
                                   m2 += dh * xhat[r * c + j];
                               }
                               m1 /= static_cast<double>(c);
                               m2 /= static_cast<double>(c);
                               double inv = inv_std[static_cast<size_t>(r)];
                               for (int64_t j = 0; j < c; ++j) {
                                   double dh = gy[r * c + j] * gn->value[j];
                                   xn->grad[r * c + j] +=
                                       inv * (dh - m1 - xhat[r * c + j] * m2);
                               }
                           }
                       }
                   });
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernels) {
    check_2d(x, "depthwise_conv1d");
    check_2d(kernels, "depthwise_conv1d");
    int64_t len = x.rows(), c = x.cols(), k = kernels.cols();
    if (kernels.rows() != c) {
        throw ShapeError("depthwise_conv1d: channel mismatch, input " + shape_str(x.shape()) +
                         " vs kernels " + shape_str(kernels.shape()));
    }
    if (k < 1) throw ContractError("depthwise_conv1d: kernel width must be >= 1");

    const double* xd = x.values().data();
    const double* wd = kernels.values().data();
    std::vector<double> y(static_cast<size_t>(len * c), 0.0);
    for (int64_t t = 0; t < len; ++t) {
        for (int64_t ch = 0; ch < c; ++ch) {
            const double* w = wd + ch * k;
            double s = 0.0;
            for (int64_t j = 0; j < k; ++j) {
                int64_t src = t - (k - 1) + j;
                if (src >= 0) s += w[j] * xd[src * c + ch];
            }
            y[t * c + ch] = s;
        }
    }

    NodePtr xn = x.node(), wn = kernels.node();
    return make_op({len, c}, std::move(y), {xn, wn}, [xn, wn, len, c, k](Node& self) {
        const double* gy = self.grad.data();
        if (xn->requires_grad) {
            ensure_grad(*xn);
            for (int64_t t = 0; t < len; ++t)
                for (int64_t ch = 0; ch < c; ++ch) {
                    double g = gy[t * c + ch];
                    if (g == 0.0) continue;
                    for (int64_t j = 0; j < k; ++j) {
                        int64_t src = t - (k - 1) + j;
                        if (src >= 0) xn->grad[src * c + ch] += g * wn->value[ch * k + j];
                    }
                }
        }
        if (wn->requires_grad) {
            ensure_grad(*wn);
            for (int64_t t = 0; t < len; ++t)
                for (int64_t ch = 0; ch < c; ++ch) {
                    double g = gy[t * c + ch];
                    if (g == 0.0) continue;
                    for (int64_t j = 0; j < k; ++j) {
                        int64_t src = t - (k - 1) + j;
                        if (src >= 0) wn->grad[ch * k + j] += g * xn->value[src * c + ch];
                    }
                }
        }
    });
}

Tensor max_pool_rows(const Tensor& x) {
    check_2d(x, "max_pool_rows");
    if (x.rows() < 1) throw ContractError("max_pool_rows: empty input");
    Tensor pooled = max_pool_groups(x, x.rows());
    return reshape(pooled, {x.cols()});
}

Tensor max_pool_groups(const Tensor& x, int64_t group) {
    check_2d(x, "max_pool_groups");
    int64_t rows = x.rows(), c = x.cols();
    if (group < 1 || rows % group != 0) {
        throw ShapeError("max_pool_groups: group " + std::to_string(group) +
                         " does not divide rows of " + shape_str(x.shape()));
    }
    int64_t g = rows / group;
    const double* xd = x.values().data();
    std::vector<double> y(static_cast<size_t>(g * c));
    std::vector<int64_t> arg(static_cast<size_t>(g * c));
    for (int64_t gi = 0; gi < g; ++gi) {
        for (int64_t j = 0; j < c; ++j) {
            int64_t best = gi * group;
            double bv = xd[best * c + j];
            for (int64_t r = gi * group + 1; r < (gi + 1) * group; ++r) {
                double v = xd[r * c + j];
                if (v > bv) {  // strict: first index wins on ties
                    bv = v;
                    best = r;
                }
            }
            y[gi * c + j] = bv;
            arg[gi * c + j] = best;
        }
    }
    NodePtr xn = x.node();
    return make_op({g, c}, std::move(y), {xn}, [xn, g, c, arg = std::move(arg)](Node& self) {
        ensure_grad(*xn);
        for (int64_t gi = 0; gi < g; ++gi)
            for (int64_t j = 0; j < c; ++j)
                xn->grad[arg[gi * c + j] * c + j] += self.grad[gi * c + j];
    });
}

Tensor softmax_rows(const Tensor& x) {
    check_2d(x, "softmax_rows");
    int64_t rows = x.rows(), c = x.cols();
    const double* xd = x.values().data();
    std::vector<double> y(static_cast<size_t>(rows * c));
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = xd + r * c;
        double mx = xr[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, xr[j]);
        double z = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            double e = std::exp(xr[j] - mx);
            y[r * c + j] = e;
            z += e;
        }
        for (int64_t j = 0; j < c; ++j) y[r * c + j] /= z;
    }
    NodePtr xn = x.node();
    std::vector<double> y_copy = y;
    return make_op({rows, c}, std::move(y), {xn},
                   [xn, rows, c, y = std::move(y_copy)](Node& self) {
                       ensure_grad(*xn);
                       for (int64_t r = 0; r < rows; ++r) {
                           double dot = 0.0;
                           for (int64_t j = 0; j < c; ++j)
                               dot += self.grad[r * c + j] * y[r * c + j];
                           for (int64_t j = 0; j < c; ++j)
                               xn->grad[r * c + j] +=
                                   y[r * c + j] * (self.grad[r * c + j] - dot);
                       }
                   });
}

Tensor outer_scale(const Tensor& w, const Tensor& p) {
    check_2d(w, "outer_scale");
    check_2d(p, "outer_scale");
    int64_t l = w.rows(), n = w.cols(), d = p.cols();
    if (p.rows() != n) {
        throw ShapeError("outer_scale: weights " + shape_str(w.shape()) + " vs values " +
                         shape_str(p.shape()));
    }
    const double* wd = w.values().data();
    const double* pd = p.values().data();
    std::vector<double> y(static_cast<size_t>(l * n * d));
    for (int64_t i = 0; i < l; ++i)
        for (int64_t j = 0; j < n; ++j) {
            double wij = wd[i * n + j];
            for (int64_t t = 0; t < d; ++t) y[(i * n + j) * d + t] = wij * pd[j * d + t];
        }
    NodePtr wn = w.node(), pn = p.node();
    return make_op({l * n, d}, std::move(y), {wn, pn}, [wn, pn, l, n, d](Node& self) {
        const double* gy = self.grad.data();
        if (wn->requires_grad) {
            ensure_grad(*wn);
            for (int64_t i = 0; i < l; ++i)
                for (int64_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (int64_t t = 0; t < d; ++t)
                        s += gy[(i * n + j) * d + t] * pn->value[j * d + t];
                    wn->grad[i * n + j] += s;
                }
        }
        if (pn->requires_grad) {
            ensure_grad(*pn);
            for (int64_t i = 0; i < l; ++i)
                for (int64_t j = 0; j < n; ++j) {
                    double wij = wn->value[i * n + j];
                    if (wij == 0.0) continue;
                    for (int64_t t = 0; t < d; ++t)
                        pn->grad[j * d + t] += gy[(i * n + j) * d + t] * wij;
                }
        }
    });
}

Tensor grid_affine(const Tensor& grid, const Tensor& alpha, const Tensor& lambda,
                   int64_t group, double sigma_floor) {
    check_2d(grid, "grid_affine");
    check_2d(lambda, "grid_affine");
    int64_t rows = grid.rows(), c = grid.cols();
    if (group < 1 || rows % group != 0) {
        throw ShapeError("grid_affine: group " + std::to_string(group) +
                         " does not divide rows of " + shape_str(grid.shape()));
    }
    int64_t g = rows / group;
    if (lambda.rows() != g || lambda.cols() != c) {
        throw ShapeError("grid_affine: lambda " + shape_str(lambda.shape()) + " must be [" +
                         std::to_string(g) + "," + std::to_string(c) + "]");
    }
    if (alpha.numel() != c) {
        throw ShapeError("grid_affine: alpha " + shape_str(alpha.shape()) +
                         " must have one entry per channel");
    }
    if (sigma_floor <= 0.0) throw ContractError("grid_affine: sigma floor must be positive");

    const double* xd = grid.values().data();
    const double* ad = alpha.values().data();
    const double* ld = lambda.values().data();
    std::vector<double> y(static_cast<size_t>(rows * c));
    std::vector<double> xhat(static_cast<size_t>(rows * c));
    std::vector<double> inv_sigma(static_cast<size_t>(g * c));
    std::vector<uint8_t> floored(static_cast<size_t>(g * c));
    double kf = static_cast<double>(group);
    for (int64_t gi = 0; gi < g; ++gi) {
        for (int64_t j = 0; j < c; ++j) {
            double mu = 0.0;
            for (int64_t r = gi * group; r < (gi + 1) * group; ++r) mu += xd[r * c + j];
            mu /= kf;
            double var = 0.0;
            for (int64_t r = gi * group; r < (gi + 1) * group; ++r) {
                double d = xd[r * c + j] - mu;
                var += d * d;
            }
            var /= kf;
            double sig = std::sqrt(var);
            bool fl = sig < sigma_floor;
            if (fl) sig = sigma_floor;
            double inv = 1.0 / sig;
            inv_sigma[gi * c + j] = inv;
            floored[gi * c + j] = fl ? 1 : 0;
            for (int64_t r = gi * group; r < (gi + 1) * group; ++r) {
                double h = (xd[r * c + j] - mu) * inv;
                xhat[r * c + j] = h;
                y[r * c + j] = ld[gi * c + j] + h * ad[j];
            }
        }
    }

    NodePtr xn = grid.node(), an = alpha.node(), ln = lambda.node();
    return make_op({rows, c}, std::move(y), {xn, an, ln},
                   [xn, an, ln, g, group, c, kf, xhat = std::move(xhat),
                    inv_sigma = std::move(inv_sigma), floored = std::move(floored)](Node& self) {
                       const double* gy = self.grad.data();
                       if (ln->requires_grad) {
                           ensure_grad(*ln);
                           for (int64_t gi = 0; gi < g; ++gi)
                               for (int64_t j = 0; j < c; ++j) {
                                   double s = 0.0;
                                   for (int64_t r = gi * group; r < (gi + 1) * group; ++r)
                                       s += gy[r * c + j];
                                   ln->grad[gi * c + j] += s;
                               }
                       }
                       if (an->requires_grad) {
                           ensure_grad(*an);
                           for (int64_t j = 0; j < c; ++j) {
                               double s = 0.0;
                               for (int64_t r = 0; r < g * group; ++r)
                                   s += gy[r * c + j] * xhat[r * c + j];
                               an->grad[j] += s;
                           }
                       }
                       if (xn->requires_grad) {
                           ensure_grad(*xn);
                           for (int64_t gi = 0; gi < g; ++gi)
                               for (int64_t j = 0; j < c; ++j) {
                                   double a = an->value[j];
                                   double inv = inv_sigma[gi * c + j];
                                   double m1 = 0.0, m2 = 0.0;
                                   for (int64_t r = gi * group; r < (gi + 1) * group; ++r) {
                                       m1 += gy[r * c + j];
                                       m2 += gy[r * c + j] * xhat[r * c + j];
                                   }
                                   m1 /= kf;
                                   m2 /= kf;
                                   bool fl = floored[gi * c + j] != 0;
                                   for (int64_t r = gi * group; r < (gi + 1) * group; ++r) {
                                       double d = gy[r * c + j] - m1;
                                       if (!fl) d -= xhat[r * c + j] * m2;
                                       xn->grad[r * c + j] += a * inv * d;
                                   }
                               }
                       }
                   });
}

Mlp Mlp::init(std::span<const int64_t> widths, Rng& rng, bool with_bias) {
    if (widths.size() < 2) throw ContractError("Mlp: need at least input and output widths");
    Mlp m;
    for (size_t i = 0; i + 1 < widths.size(); ++i) {
        m.layers.push_back(LinearLayer::init(widths[i], widths[i + 1], rng, with_bias));
    }
    return m;
}

Tensor Mlp::forward(const Tensor& x) const {
    Tensor h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
        h = linear(h, layers[i]);
        if (i + 1 < layers.size()) h = silu(h);
    }
    return h;
}

void Mlp::zero_last_layer() {
    if (layers.empty()) return;
    LinearLayer& last = layers.back();
    auto w = last.weight.values_mut();
    std::fill(w.begin(), w.end(), 0.0);
    if (last.bias.defined()) {
        auto b = last.bias.values_mut();
        std::fill(b.begin(), b.end(), 0.0);
    }
}

void collect(NamedParams& out, const std::string& name, const Tensor& t) {
    if (t.defined()) out.emplace_back(name, t);
}

void collect(NamedParams& out, const std::string& prefix, const LinearLayer& l) {
    collect(out, prefix + ".weight", l.weight);
    collect(out, prefix + ".bias", l.bias);
}

void collect(NamedParams& out, const std::string& prefix, const LayerNorm& ln) {
    collect(out, prefix + ".gain", ln.gain);
    collect(out, prefix + ".shift", ln.shift);
}

void collect(NamedParams& out, const std::string& prefix, const Mlp& m) {
    for (size_t i = 0; i < m.layers.size(); ++i) {
        collect(out, prefix + ".l" + std::to_string(i), m.layers[i]);
    }
}

int64_t param_count(const NamedParams& params) {
    int64_t n = 0;
    for (const auto& [name, t] : params) n += t.numel();
    return n;
}

}  // namespace hc
