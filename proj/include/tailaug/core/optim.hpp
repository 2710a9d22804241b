#pragma once

#include <cmath>

#include "tailaug/core/errors.hpp"
#include "tailaug/core/graph.hpp"

namespace tailaug {

// Adam with bias correction; one instance per ParamSet.
class Adam {
public:
    explicit Adam(ParamSet& params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void set_lr(double lr) { lr_ = lr; }

    void step() {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, t_);
        double bc2 = 1.0 - std::pow(beta2_, t_);
        for (auto& p : params_.all()) {
            for (int i = 0; i < p->value.size(); ++i) {
                double gr = p->grad.data[i];
                double m = p->m.data[i] = beta1_ * p->m.data[i] + (1.0 - beta1_) * gr;
                double v = p->v.data[i] = beta2_ * p->v.data[i] + (1.0 - beta2_) * gr * gr;
                p->value.data[i] -= lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_);
            }
        }
        params_.zero_grad();
    }

private:
    ParamSet& params_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace tailaug
