#include "te/lstm.hpp"

namespace te {

void LstmLayer::init(int din_, int dh_, Rng& rng) {
    din = din_;
    dh = dh_;
    wx = Tensor({din, 4 * dh});
    wh = Tensor({dh, 4 * dh});
    b = Tensor({4 * dh});
    init_fan_in(wx, din, rng);
    init_fan_in(wh, dh, rng);
    // forget-gate bias starts at 1 so early training does not wipe the cell
    for (int j = dh; j < 2 * dh; ++j) b.data[j] = 1.0;
    gwx = Tensor({din, 4 * dh});
    gwh = Tensor({dh, 4 * dh});
    gb = Tensor({4 * dh});
}

void LstmLayer::zero_grads() {
    gwx.zero();
    gwh.zero();
    gb.zero();
}

std::vector<ParamRef> LstmLayer::params(const std::string& prefix) {
    return {{prefix + ".wx", &wx, &gwx}, {prefix + ".wh", &wh, &gwh}, {prefix + ".b", &b, &gb}};
}

void LstmLayer::step(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev, Tensor& h_t,
                     Tensor& c_t, Tensor* gates_out) const {
    if (x_t.rank() != 2 || x_t.dim(1) != din)
        throw GeometryError("lstm step: input " + shape_str(x_t.shape) + " vs din=" +
                            std::to_string(din));
    const int n = x_t.dim(0);
    require_shape(h_prev, {n, dh}, "lstm step h_prev");
    require_shape(c_prev, {n, dh}, "lstm step c_prev");
    Tensor z({n, 4 * dh});
    for (int ni = 0; ni < n; ++ni) {
        double* zp = &z.data[z.offset({ni, 0})];
        for (int j = 0; j < 4 * dh; ++j) zp[j] = b.data[j];
        const double* xp = &x_t.data[x_t.offset({ni, 0})];
        for (int i = 0; i < din; ++i) {
            double xv = xp[i];
            const double* wp = &wx.data[wx.offset({i, 0})];
            for (int j = 0; j < 4 * dh; ++j) zp[j] += xv * wp[j];
        }
        const double* hp = &h_prev.data[h_prev.offset({ni, 0})];
        for (int i = 0; i < dh; ++i) {
            double hv = hp[i];
            const double* wp = &wh.data[wh.offset({i, 0})];
            for (int j = 0; j < 4 * dh; ++j) zp[j] += hv * wp[j];
        }
    }
    h_t = Tensor({n, dh});
    c_t = Tensor({n, dh});
    for (int ni = 0; ni < n; ++ni) {
        double* zp = &z.data[z.offset({ni, 0})];
        const double* cp = &c_prev.data[c_prev.offset({ni, 0})];
        for (int j = 0; j < dh; ++j) {
            double ig = 1.0 / (1.0 + std::exp(-zp[j]));
            double fg = 1.0 / (1.0 + std::exp(-zp[dh + j]));
            double gg = std::tanh(zp[2 * dh + j]);
            double og = 1.0 / (1.0 + std::exp(-zp[3 * dh + j]));
            zp[j] = ig;
            zp[dh + j] = fg;
            zp[2 * dh + j] = gg;
            zp[3 * dh + j] = og;
            double cv = fg * cp[j] + ig * gg;
            c_t.data[c_t.offset({ni, j})] = cv;
            h_t.data[h_t.offset({ni, j})] = og * std::tanh(cv);
        }
    }
    if (gates_out) *gates_out = std::move(z);
}

Tensor LstmLayer::forward(const Tensor& x, Cache& cache) const {
    if (x.rank() != 3 || x.dim(2) != din)
        throw GeometryError("lstm: input " + shape_str(x.shape) + " vs din=" + std::to_string(din));
    const int n = x.dim(0), t = x.dim(1);
    cache.n = n;
    cache.t = t;
    cache.x = x;
    cache.gates.clear();
    cache.c.clear();
    cache.h.clear();
    cache.c_tanh.clear();
    Tensor h_prev({n, dh}), c_prev({n, dh});
    Tensor out({n, t, dh});
    for (int ti = 0; ti < t; ++ti) {
        Tensor x_t({n, din});
        for (int ni = 0; ni < n; ++ni)
            std::copy(&x.data[x.offset({ni, ti, 0})], &x.data[x.offset({ni, ti, 0})] + din,
                      &x_t.data[x_t.offset({ni, 0})]);
        Tensor h_t, c_t, gates;
        step(x_t, h_prev, c_prev, h_t, c_t, &gates);
        Tensor ct(c_t.shape);
        for (std::size_t i = 0; i < ct.data.size(); ++i) ct.data[i] = std::tanh(c_t.data[i]);
        for (int ni = 0; ni < n; ++ni)
            std::copy(&h_t.data[h_t.offset({ni, 0})], &h_t.data[h_t.offset({ni, 0})] + dh,
                      &out.data[out.offset({ni, ti, 0})]);
        cache.gates.push_back(std::move(gates));
        cache.c.push_back(c_t);
        cache.h.push_back(h_t);
        cache.c_tanh.push_back(std::move(ct));
        h_prev = cache.h.back();
        c_prev = cache.c.back();
    }
    return out;
}

Tensor LstmLayer::backward(const Tensor& dh_seq, const Cache& cache) {
    const int n = cache.n, t = cache.t;
    require_shape(dh_seq, {n, t, dh}, "lstm backward");
    Tensor dx({n, t, din});
    Tensor dh_next({n, dh}), dc_next({n, dh});
    for (int ti = t - 1; ti >= 0; --ti) {
        const Tensor& gates = cache.gates[static_cast<std::size_t>(ti)];
        const Tensor& ct = cache.c_tanh[static_cast<std::size_t>(ti)];
        Tensor dz({n, 4 * dh});
        Tensor dh_prev({n, dh}), dc_prev({n, dh});
        for (int ni = 0; ni < n; ++ni) {
            const double* gp = &gates.data[gates.offset({ni, 0})];
            for (int j = 0; j < dh; ++j) {
                double dh_t = dh_seq.at({ni, ti, j}) + dh_next.at({ni, j});
                double ig = gp[j], fg = gp[dh + j], gg = gp[2 * dh + j], og = gp[3 * dh + j];
                double tc = ct.at({ni, j});
                double dc = dc_next.at({ni, j}) + dh_t * og * (1.0 - tc * tc);
                double c_prev = ti > 0 ? cache.c[static_cast<std::size_t>(ti - 1)].at({ni, j}) : 0.0;
                dz.at({ni, j}) = dc * gg * ig * (1.0 - ig);
                dz.at({ni, dh + j}) = dc * c_prev * fg * (1.0 - fg);
                dz.at({ni, 2 * dh + j}) = dc * ig * (1.0 - gg * gg);
                dz.at({ni, 3 * dh + j}) = dh_t * tc * og * (1.0 - og);
                dc_prev.at({ni, j}) = dc * fg;
            }
        }
        // dz -> parameter grads, dx_t, dh_prev
        for (int ni = 0; ni < n; ++ni) {
            const double* dzp = &dz.data[dz.offset({ni, 0})];
            for (int j = 0; j < 4 * dh; ++j) gb.data[j] += dzp[j];
            const double* xp = &cache.x.data[cache.x.offset({ni, ti, 0})];
            double* dxp = &dx.data[dx.offset({ni, ti, 0})];
            for (int i = 0; i < din; ++i) {
                const double* wp = &wx.data[wx.offset({i, 0})];
                double* gwp = &gwx.data[gwx.offset({i, 0})];
                double acc = 0.0;
                for (int j = 0; j < 4 * dh; ++j) {
                    acc += dzp[j] * wp[j];
                    gwp[j] += xp[i] * dzp[j];
                }
                dxp[i] = acc;
            }
            const double* hp = ti > 0
                                   ? &cache.h[static_cast<std::size_t>(ti - 1)]
                                          .data[cache.h[static_cast<std::size_t>(ti - 1)].offset(
                                              {ni, 0})]
                                   : nullptr;
            double* dhp = &dh_prev.data[dh_prev.offset({ni, 0})];
            for (int i = 0; i < dh; ++i) {
                const double* wp = &wh.data[wh.offset({i, 0})];
                double* gwp = &gwh.data[gwh.offset({i, 0})];
                double hv = hp ? hp[i] : 0.0;
                double acc = 0.0;
                for (int j = 0; j < 4 * dh; ++j) {
                    acc += dzp[j] * wp[j];
                    gwp[j] += hv * dzp[j];
                }
                dhp[i] = acc;
            }
        }
        dh_next = std::move(dh_prev);
        dc_next = std::move(dc_prev);
    }
    return dx;
}

}  // namespace te
