#pragma once

#include "te/adam.hpp"
#include "te/layers.hpp"

namespace te {

// Single-layer LSTM over [N,T,din] sequences, gate order i,f,g,o.
struct LstmLayer {
    int din = 0, dh = 0;
    Tensor wx;  // [din, 4*dh]
    Tensor wh;  // [dh, 4*dh]
    Tensor b;   // [4*dh]
    Tensor gwx, gwh, gb;

    struct Cache {
        int n = 0, t = 0;
        Tensor x;                    // [N,T,din]
        std::vector<Tensor> gates;   // per step [N,4*dh] post-activation
        std::vector<Tensor> c;       // per step [N,dh]
        std::vector<Tensor> h;       // per step [N,dh]
        std::vector<Tensor> c_tanh;  // per step [N,dh]
    };

    void init(int din_, int dh_, Rng& rng);
    void zero_grads();
    std::vector<ParamRef> params(const std::string& prefix);

    // One cell step. h_prev/c_prev are [N,dh]; x_t is [N,din].
    void step(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev, Tensor& h_t,
              Tensor& c_t, Tensor* gates_out = nullptr) const;

    // Full sequence pass from zero state; returns [N,T,dh].
    Tensor forward(const Tensor& x, Cache& cache) const;
    // BPTT; accumulates parameter gradients and returns dL/dx.
    Tensor backward(const Tensor& dh_seq, const Cache& cache);
};

}  // namespace te
