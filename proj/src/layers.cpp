#include "te/layers.hpp"

namespace te {

Tensor tanh_fwd(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data) v = std::tanh(v);
    return y;
}

Tensor tanh_bwd(const Tensor& y, const Tensor& dy) {
    assert(y.same_shape(dy));
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= 1.0 - y.data[i] * y.data[i];
    return dx;
}

Tensor sigmoid_fwd(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
    return y;
}

Tensor sigmoid_bwd(const Tensor& y, const Tensor& dy) {
    assert(y.same_shape(dy));
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= y.data[i] * (1.0 - y.data[i]);
    return dx;
}

namespace {

// Same-padding bookkeeping: out = ceil(in/stride), low-edge pad first.
struct ConvGeom {
    int out_h, out_w, pad_h, pad_w;
};

ConvGeom same_geom(int h, int w, int kh, int kw, int s) {
    ConvGeom g;
    g.out_h = (h + s - 1) / s;
    g.out_w = (w + s - 1) / s;
    int tot_h = std::max((g.out_h - 1) * s + kh - h, 0);
    int tot_w = std::max((g.out_w - 1) * s + kw - w, 0);
    g.pad_h = tot_h / 2;
    g.pad_w = tot_w / 2;
    return g;
}

}  // namespace

void Conv2d::init(int cin_, int cout_, int stride_, Rng& rng, int kh_, int kw_) {
    kh = kh_;
    kw = kw_;
    cin = cin_;
    cout = cout_;
    stride = stride_;
    w = Tensor({kh, kw, cin, cout});
    b = Tensor({cout});
    init_fan_in(w, kh * kw * cin, rng);
    gw = Tensor({kh, kw, cin, cout});
    gb = Tensor({cout});
}

void Conv2d::zero_grads() {
    gw.zero();
    gb.zero();
}

Tensor Conv2d::forward(const Tensor& x) const {
    if (x.rank() != 4 || x.dim(3) != cin)
        throw GeometryError("conv2d: input " + shape_str(x.shape) + " incompatible with cin=" +
                            std::to_string(cin));
    const int n = x.dim(0), h = x.dim(1), ww = x.dim(2);
    ConvGeom g = same_geom(h, ww, kh, kw, stride);
    Tensor y({n, g.out_h, g.out_w, cout});
    std::vector<double> acc(static_cast<std::size_t>(cout));
    for (int ni = 0; ni < n; ++ni)
        for (int oy = 0; oy < g.out_h; ++oy)
            for (int ox = 0; ox < g.out_w; ++ox) {
                for (int co = 0; co < cout; ++co) acc[co] = b.data[co];
                for (int ky = 0; ky < kh; ++ky) {
                    int iy = oy * stride - g.pad_h + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        int ix = ox * stride - g.pad_w + kx;
                        if (ix < 0 || ix >= ww) continue;
                        const double* xp = &x.data[x.offset({ni, iy, ix, 0})];
                        const double* wp = &w.data[w.offset({ky, kx, 0, 0})];
                        for (int ci = 0; ci < cin; ++ci) {
                            double xv = xp[ci];
                            const double* wc = wp + static_cast<std::size_t>(ci) * cout;
                            for (int co = 0; co < cout; ++co) acc[co] += xv * wc[co];
                        }
                    }
                }
                std::copy(acc.begin(), acc.end(), &y.data[y.offset({ni, oy, ox, 0})]);
            }
    return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& dy) {
    const int n = x.dim(0), h = x.dim(1), ww = x.dim(2);
    ConvGeom g = same_geom(h, ww, kh, kw, stride);
    require_shape(dy, {n, g.out_h, g.out_w, cout}, "conv2d backward");
    Tensor dx(x.shape);
    for (int ni = 0; ni < n; ++ni)
        for (int oy = 0; oy < g.out_h; ++oy)
            for (int ox = 0; ox < g.out_w; ++ox) {
                const double* dyp = &dy.data[dy.offset({ni, oy, ox, 0})];
                for (int co = 0; co < cout; ++co) gb.data[co] += dyp[co];
                for (int ky = 0; ky < kh; ++ky) {
                    int iy = oy * stride - g.pad_h + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        int ix = ox * stride - g.pad_w + kx;
                        if (ix < 0 || ix >= ww) continue;
                        const double* xp = &x.data[x.offset({ni, iy, ix, 0})];
                        double* dxp = &dx.data[dx.offset({ni, iy, ix, 0})];
                        for (int ci = 0; ci < cin; ++ci) {
                            double xv = xp[ci];
                            const double* wc = &w.data[w.offset({ky, kx, ci, 0})];
                            double* gwc = &gw.data[gw.offset({ky, kx, ci, 0})];
                            double acc = 0.0;
                            for (int co = 0; co < cout; ++co) {
                                acc += dyp[co] * wc[co];
                                gwc[co] += xv * dyp[co];
                            }
                            dxp[ci] += acc;
                        }
                    }
                }
            }
    return dx;
}

void Deconv2d::init(int cin_, int cout_, int stride_, Rng& rng, int kh_, int kw_) {
    kh = kh_;
    kw = kw_;
    cin = cin_;
    cout = cout_;
    stride = stride_;
    w = Tensor({kh, kw, cin, cout});
    b = Tensor({cout});
    init_fan_in(w, kh * kw * cin, rng);
    gw = Tensor({kh, kw, cin, cout});
    gb = Tensor({cout});
}

void Deconv2d::zero_grads() {
    gw.zero();
    gb.zero();
}

Tensor Deconv2d::forward(const Tensor& x) const {
    if (x.rank() != 4 || x.dim(3) != cin)
        throw GeometryError("deconv2d: input " + shape_str(x.shape) + " incompatible with cin=" +
                            std::to_string(cin));
    const int n = x.dim(0), h = x.dim(1), ww = x.dim(2);
    const int oh = h * stride, ow = ww * stride;
    Tensor y({n, oh, ow, cout});
    for (int ni = 0; ni < n; ++ni) {
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double* yp = &y.data[y.offset({ni, oy, ox, 0})];
                for (int co = 0; co < cout; ++co) yp[co] = b.data[co];
            }
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < ww; ++ix) {
                const double* xp = &x.data[x.offset({ni, iy, ix, 0})];
                for (int ky = 0; ky < kh; ++ky) {
                    int oy = iy * stride + ky;
                    if (oy >= oh) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        int ox = ix * stride + kx;
                        if (ox >= ow) continue;
                        double* yp = &y.data[y.offset({ni, oy, ox, 0})];
                        for (int ci = 0; ci < cin; ++ci) {
                            double xv = xp[ci];
                            const double* wc = &w.data[w.offset({ky, kx, ci, 0})];
                            for (int co = 0; co < cout; ++co) yp[co] += xv * wc[co];
                        }
                    }
                }
            }
    }
    return y;
}

Tensor Deconv2d::backward(const Tensor& x, const Tensor& dy) {
    const int n = x.dim(0), h = x.dim(1), ww = x.dim(2);
    const int oh = h * stride, ow = ww * stride;
    require_shape(dy, {n, oh, ow, cout}, "deconv2d backward");
    Tensor dx(x.shape);
    for (std::size_t i = 0; i < dy.data.size(); ++i)
        gb.data[i % static_cast<std::size_t>(cout)] += dy.data[i];
    for (int ni = 0; ni < n; ++ni)
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < ww; ++ix) {
                const double* xp = &x.data[x.offset({ni, iy, ix, 0})];
                double* dxp = &dx.data[dx.offset({ni, iy, ix, 0})];
                for (int ky = 0; ky < kh; ++ky) {
                    int oy = iy * stride + ky;
                    if (oy >= oh) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        int ox = ix * stride + kx;
                        if (ox >= ow) continue;
                        const double* dyp = &dy.data[dy.offset({ni, oy, ox, 0})];
                        for (int ci = 0; ci < cin; ++ci) {
                            const double* wc = &w.data[w.offset({ky, kx, ci, 0})];
                            double* gwc = &gw.data[gw.offset({ky, kx, ci, 0})];
                            double acc = 0.0;
                            for (int co = 0; co < cout; ++co) {
                                acc += dyp[co] * wc[co];
                                gwc[co] += xp[ci] * dyp[co];
                            }
                            dxp[ci] += acc;
                        }
                    }
                }
            }
    return dx;
}

void Dense::init(int din_, int dout_, Rng& rng) {
    din = din_;
    dout = dout_;
    w = Tensor({din, dout});
    b = Tensor({dout});
    init_fan_in(w, din, rng);
    gw = Tensor({din, dout});
    gb = Tensor({dout});
}

void Dense::zero_grads() {
    gw.zero();
    gb.zero();
}

Tensor Dense::forward(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != din)
        throw GeometryError("dense: input " + shape_str(x.shape) + " incompatible with din=" +
                            std::to_string(din));
    const int n = x.dim(0);
    Tensor y({n, dout});
    for (int ni = 0; ni < n; ++ni) {
        double* yp = &y.data[y.offset({ni, 0})];
        for (int o = 0; o < dout; ++o) yp[o] = b.data[o];
        const double* xp = &x.data[x.offset({ni, 0})];
        for (int i = 0; i < din; ++i) {
            double xv = xp[i];
            const double* wp = &w.data[w.offset({i, 0})];
            for (int o = 0; o < dout; ++o) yp[o] += xv * wp[o];
        }
    }
    return y;
}

Tensor Dense::backward(const Tensor& x, const Tensor& dy) {
    const int n = x.dim(0);
    require_shape(dy, {n, dout}, "dense backward");
    Tensor dx({n, din});
    for (int ni = 0; ni < n; ++ni) {
        const double* xp = &x.data[x.offset({ni, 0})];
        const double* dyp = &dy.data[dy.offset({ni, 0})];
        double* dxp = &dx.data[dx.offset({ni, 0})];
        for (int o = 0; o < dout; ++o) gb.data[o] += dyp[o];
        for (int i = 0; i < din; ++i) {
            const double* wp = &w.data[w.offset({i, 0})];
            double* gwp = &gw.data[gw.offset({i, 0})];
            double acc = 0.0;
            for (int o = 0; o < dout; ++o) {
                acc += dyp[o] * wp[o];
                gwp[o] += xp[i] * dyp[o];
            }
            dxp[i] = acc;
        }
    }
    return dx;
}

void BatchNorm::init(int c_) {
    c = c_;
    gamma = Tensor({c});
    gamma.fill(1.0);
    beta = Tensor({c});
    run_mean = Tensor({c});
    run_var = Tensor({c});
    run_var.fill(1.0);
    ggamma = Tensor({c});
    gbeta = Tensor({c});
}

void BatchNorm::zero_grads() {
    ggamma.zero();
    gbeta.zero();
}

Tensor BatchNorm::forward(const Tensor& x, bool train, Cache* cache) {
    if (x.rank() < 2 || x.dim(x.rank() - 1) != c)
        throw GeometryError("batchnorm: last axis of " + shape_str(x.shape) + " must be " +
                            std::to_string(c));
    if (!train) return forward_infer(x);
    const std::size_t rows = x.numel() / static_cast<std::size_t>(c);
    if (rows < 2) throw GeometryError("batchnorm: train mode needs batch of at least 2");
    std::vector<double> mean(static_cast<std::size_t>(c), 0.0), var(static_cast<std::size_t>(c), 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (int j = 0; j < c; ++j) mean[j] += x.data[r * c + j];
    for (int j = 0; j < c; ++j) mean[j] /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
        for (int j = 0; j < c; ++j) {
            double d = x.data[r * c + j] - mean[j];
            var[j] += d * d;
        }
    for (int j = 0; j < c; ++j) var[j] /= static_cast<double>(rows);

    Tensor y(x.shape);
    Cache local;
    Cache& cc = cache ? *cache : local;
    cc.xhat = Tensor(x.shape);
    cc.inv_std.assign(static_cast<std::size_t>(c), 0.0);
    cc.rows = rows;
    for (int j = 0; j < c; ++j) cc.inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
    for (std::size_t r = 0; r < rows; ++r)
        for (int j = 0; j < c; ++j) {
            double xh = (x.data[r * c + j] - mean[j]) * cc.inv_std[j];
            cc.xhat.data[r * c + j] = xh;
            y.data[r * c + j] = gamma.data[j] * xh + beta.data[j];
        }
    for (int j = 0; j < c; ++j) {
        run_mean.data[j] = momentum * run_mean.data[j] + (1.0 - momentum) * mean[j];
        run_var.data[j] = momentum * run_var.data[j] + (1.0 - momentum) * var[j];
    }
    return y;
}

Tensor BatchNorm::forward_infer(const Tensor& x) const {
    const std::size_t rows = x.numel() / static_cast<std::size_t>(c);
    Tensor y(x.shape);
    for (std::size_t r = 0; r < rows; ++r)
        for (int j = 0; j < c; ++j) {
            double inv = 1.0 / std::sqrt(run_var.data[j] + eps);
            y.data[r * c + j] = gamma.data[j] * (x.data[r * c + j] - run_mean.data[j]) * inv +
                                beta.data[j];
        }
    return y;
}

Tensor BatchNorm::backward(const Tensor& dy, const Cache& cache) {
    require_shape(dy, cache.xhat.shape, "batchnorm backward");
    const std::size_t rows = cache.rows;
    const double m = static_cast<double>(rows);
    std::vector<double> sum_dy(static_cast<std::size_t>(c), 0.0),
        sum_dy_xhat(static_cast<std::size_t>(c), 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (int j = 0; j < c; ++j) {
            double d = dy.data[r * c + j];
            sum_dy[j] += d;
            sum_dy_xhat[j] += d * cache.xhat.data[r * c + j];
        }
    for (int j = 0; j < c; ++j) {
        gbeta.data[j] += sum_dy[j];
        ggamma.data[j] += sum_dy_xhat[j];
    }
    Tensor dx(dy.shape);
    for (std::size_t r = 0; r < rows; ++r)
        for (int j = 0; j < c; ++j) {
            double xh = cache.xhat.data[r * c + j];
            dx.data[r * c + j] = gamma.data[j] * cache.inv_std[j] / m *
                                 (m * dy.data[r * c + j] - sum_dy[j] - xh * sum_dy_xhat[j]);
        }
    return dx;
}

}  // namespace te
