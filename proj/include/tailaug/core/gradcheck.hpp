#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tailaug/core/graph.hpp"
#include "tailaug/core/rng.hpp"

namespace tailaug {

// Central-finite-difference comparison of analytic gradients. The loss
// closure must be a deterministic pure function of the parameter values
// (freeze any sampling noise before calling).
struct GradCheckResult {
    int checked = 0;
    int passed = 0;
    double worst_rel_err = 0.0;
    std::string worst_coord;

    double pass_rate() const { return checked ? static_cast<double>(passed) / checked : 1.0; }
};

inline GradCheckResult gradcheck(ParamSet& params,
                                 const std::function<double()>& loss_fn,
                                 const std::function<void()>& grad_fn,
                                 int samples_per_param,
                                 uint64_t seed,
                                 double rel_tol = 1e-3,
                                 double h = 1e-5,
                                 double abs_floor = 1e-8) {
    params.zero_grad();
    grad_fn();  // fills analytic gradients

    std::vector<std::vector<double>> analytic;
    for (auto& p : params.all()) analytic.push_back(p->grad.data);

    GradCheckResult res;
    Rng rng(seed);
    size_t pi = 0;
    for (auto& p : params.all()) {
        int n = p->value.size();
        int take = std::min(samples_per_param, n);
        for (int s = 0; s < take; ++s) {
            int i = static_cast<int>(rng.randint(static_cast<uint64_t>(n)));
            double orig = p->value.data[i];
            p->value.data[i] = orig + h;
            double up = loss_fn();
            p->value.data[i] = orig - h;
            double down = loss_fn();
            p->value.data[i] = orig;
            double numeric = (up - down) / (2.0 * h);
            double ana = analytic[pi][i];
            double denom = std::max({std::abs(numeric), std::abs(ana), abs_floor});
            double rel = std::abs(numeric - ana) / denom;
            // both effectively zero counts as a pass
            if (std::abs(numeric) < abs_floor && std::abs(ana) < abs_floor) rel = 0.0;
            ++res.checked;
            if (rel <= rel_tol)
                ++res.passed;
            if (rel > res.worst_rel_err) {
                res.worst_rel_err = rel;
                res.worst_coord = p->name + "[" + std::to_string(i) + "]";
            }
        }
        ++pi;
    }
    params.zero_grad();
    return res;
}

}  // namespace tailaug
