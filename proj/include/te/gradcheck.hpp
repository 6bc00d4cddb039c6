#pragma once

#include <functional>
#include <limits>

#include "te/adam.hpp"
#include "te/tensor.hpp"

namespace te {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    bool finite = true;

    bool passed(double tol) const { return finite && max_rel_err <= tol; }
};

// Central-difference check of analytic gradients. `loss_fn` must recompute
// the loss from the parameters' current values; `params` carry the analytic
// gradients to compare against. When coords_per_tensor > 0 only a random
// subset of coordinates is probed (needed for large models).
inline GradCheckReport grad_check(const std::function<double()>& loss_fn,
                                  const std::vector<ParamRef>& params, Rng& rng,
                                  int coords_per_tensor = 0, double h_scale = 1e-5) {
    GradCheckReport rep;
    for (const ParamRef& p : params) {
        const std::size_t n = p.value->numel();
        std::vector<std::size_t> coords;
        if (coords_per_tensor <= 0 || static_cast<std::size_t>(coords_per_tensor) >= n) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            for (int i = 0; i < coords_per_tensor; ++i)
                coords.push_back(static_cast<std::size_t>(rng.next_u64() % n));
        }
        for (std::size_t i : coords) {
            double saved = p.value->data[i];
            double h = h_scale * std::max(1.0, std::abs(saved));
            p.value->data[i] = saved + h;
            double lp = loss_fn();
            p.value->data[i] = saved - h;
            double lm = loss_fn();
            p.value->data[i] = saved;
            double numeric = (lp - lm) / (2.0 * h);
            double analytic = p.grad->data[i];
            if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
                rep.finite = false;
                rep.max_rel_err = std::numeric_limits<double>::infinity();
                rep.worst_param = p.name;
                rep.worst_index = i;
                return rep;
            }
            double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
            double rel = std::abs(numeric - analytic) / denom;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = p.name;
                rep.worst_index = i;
            }
        }
    }
    return rep;
}

}  // namespace te
