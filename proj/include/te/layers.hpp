#pragma once

#include "te/tensor.hpp"

namespace te {

// Elementwise activations. Backward variants take the forward *output*,
// which is all the standard derivatives need.
Tensor tanh_fwd(const Tensor& x);
Tensor tanh_bwd(const Tensor& y, const Tensor& dy);
Tensor sigmoid_fwd(const Tensor& x);
Tensor sigmoid_bwd(const Tensor& y, const Tensor& dy);

// 2-D convolution over NHWC with same-padding. Output spatial size is
// ceil(in/stride); padding is split with the surplus at the high edge.
struct Conv2d {
    int kh = 3, kw = 3, cin = 0, cout = 0, stride = 1;
    Tensor w;  // [kh,kw,cin,cout]
    Tensor b;  // [cout]
    Tensor gw, gb;

    void init(int cin_, int cout_, int stride_, Rng& rng, int kh_ = 3, int kw_ = 3);
    void zero_grads();
    Tensor forward(const Tensor& x) const;
    // Accumulates gw/gb, returns dL/dx.
    Tensor backward(const Tensor& x, const Tensor& dy);
};

// Transposed convolution, stride s, output spatial size = s * input size.
// Exactly the adjoint of Conv2d's stride-s geometry.
struct Deconv2d {
    int kh = 3, kw = 3, cin = 0, cout = 0, stride = 2;
    Tensor w;  // [kh,kw,cin,cout]
    Tensor b;  // [cout]
    Tensor gw, gb;

    void init(int cin_, int cout_, int stride_, Rng& rng, int kh_ = 3, int kw_ = 3);
    void zero_grads();
    Tensor forward(const Tensor& x) const;
    Tensor backward(const Tensor& x, const Tensor& dy);
};

// Affine map: [N,Din] x [Din,Dout] + b.
struct Dense {
    int din = 0, dout = 0;
    Tensor w;  // [din,dout]
    Tensor b;  // [dout]
    Tensor gw, gb;

    void init(int din_, int dout_, Rng& rng);
    void zero_grads();
    Tensor forward(const Tensor& x) const;
    Tensor backward(const Tensor& x, const Tensor& dy);
};

// Batch normalization over the last axis; every leading axis is batch.
// Train mode normalizes by batch statistics and folds them into the
// running estimates; infer mode uses the running estimates only.
struct BatchNorm {
    int c = 0;
    double eps = 1e-5;
    double momentum = 0.9;
    Tensor gamma, beta;
    Tensor run_mean, run_var;
    Tensor ggamma, gbeta;

    struct Cache {
        Tensor xhat;
        std::vector<double> inv_std;
        std::size_t rows = 0;
    };

    void init(int c_);
    void zero_grads();
    Tensor forward(const Tensor& x, bool train, Cache* cache = nullptr);
    Tensor forward_infer(const Tensor& x) const;
    Tensor backward(const Tensor& dy, const Cache& cache);
};

}  // namespace te
