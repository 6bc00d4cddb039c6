#pragma once

#include <map>
#include <string>
#include <utility>

#include "te/tensor.hpp"

namespace te {

// A named (parameter, gradient) pair; models hand these out so the optimizer
// and the serializers never need to know the architecture.
struct ParamRef {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard adam with bias correction. Moment tensors are allocated lazily,
// keyed by parameter name.
struct AdamState {
    AdamConfig cfg;
    long step = 0;
    std::map<std::string, std::pair<Tensor, Tensor>> moments;  // name -> (m, v)

    explicit AdamState(AdamConfig c = {}) : cfg(c) {}

    void update(const std::vector<ParamRef>& params) {
        ++step;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
        for (const ParamRef& p : params) {
            auto it = moments.find(p.name);
            if (it == moments.end())
                it = moments.emplace(p.name, std::make_pair(Tensor(p.value->shape),
                                                            Tensor(p.value->shape))).first;
            Tensor& m = it->second.first;
            Tensor& v = it->second.second;
            if (!m.same_shape(*p.value))
                throw GeometryError("adam: moment shape mismatch for " + p.name);
            for (std::size_t i = 0; i < p.value->data.size(); ++i) {
                double g = p.grad->data[i];
                m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g;
                v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g * g;
                double mhat = m.data[i] / bc1;
                double vhat = v.data[i] / bc2;
                p.value->data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            }
        }
    }
};

}  // namespace te
