#include "te/losses.hpp"

#include <algorithm>

namespace te {

double mse_loss(const Tensor& pred, const Tensor& target, Tensor* d_pred) {
    if (!pred.same_shape(target))
        throw GeometryError("mse: pred " + shape_str(pred.shape) + " vs target " +
                            shape_str(target.shape));
    const double n = static_cast<double>(pred.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        double d = pred.data[i] - target.data[i];
        acc += d * d;
    }
    if (d_pred) {
        *d_pred = Tensor(pred.shape);
        for (std::size_t i = 0; i < pred.data.size(); ++i)
            d_pred->data[i] = 2.0 * (pred.data[i] - target.data[i]) / n;
    }
    return acc / n;
}

double weighted_bce_loss(const Tensor& probs, const Tensor& targets, const Tensor& weights,
                         Tensor* d_probs) {
    if (probs.rank() != 2 || !probs.same_shape(targets))
        throw GeometryError("wbce: probs " + shape_str(probs.shape) + " vs targets " +
                            shape_str(targets.shape));
    const int labels = probs.dim(1);
    if (weights.rank() != 1 || weights.dim(0) != labels)
        throw GeometryError("wbce: weight vector " + shape_str(weights.shape) +
                            " does not match label count " + std::to_string(labels));
    const int n = probs.dim(0);
    double acc = 0.0;
    if (d_probs) *d_probs = Tensor(probs.shape);
    for (int r = 0; r < n; ++r)
        for (int i = 0; i < labels; ++i) {
            std::size_t k = static_cast<std::size_t>(r) * labels + i;
            double p = std::clamp(probs.data[k], kBceClampEps, 1.0 - kBceClampEps);
            double y = targets.data[k];
            double w = weights.data[static_cast<std::size_t>(i)];
            acc += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p)) * w;
            if (d_probs) {
                bool clamped = probs.data[k] < kBceClampEps || probs.data[k] > 1.0 - kBceClampEps;
                d_probs->data[k] =
                    clamped ? 0.0 : -(y / p - (1.0 - y) / (1.0 - p)) * w / static_cast<double>(n);
            }
        }
    return acc / static_cast<double>(n);
}

}  // namespace te
