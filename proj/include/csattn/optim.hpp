#pragma once

#include "csattn/params.hpp"

namespace csattn {

// Cosine annealing from lr_init at step 0 to lr_final at total_steps.
// Endpoints are returned exactly.
inline double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_init, double lr_final) {
    if (total_steps <= 0) throw std::runtime_error("cosine_lr: total_steps must be positive");
    if (step < 0 || step > total_steps) throw std::runtime_error("cosine_lr: step out of range");
    if (step == 0) return lr_init;
    if (step == total_steps) return lr_final;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps);
    return lr_final + 0.5 * (lr_init - lr_final) * (1.0 + std::cos(3.14159265358979323846 * t));
}

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// AdamW with decoupled weight decay:
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta
template <typename T>
class AdamW {
public:
    AdamW(const ParamStore<T>& params, AdamWConfig cfg) : cfg_(cfg) {
        m_.reserve(params.count());
        v_.reserve(params.count());
        for (const auto& t : params.tensors) {
            m_.emplace_back(Tensor<T>(t.shape));
            v_.emplace_back(Tensor<T>(t.shape));
        }
    }

    void step(ParamStore<T>& params, const std::vector<Tensor<T>>& grads, double lr) {
        if (grads.size() != params.count()) throw std::runtime_error("adamw: gradient count mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
        const T ob1 = static_cast<T>(1.0 - cfg_.beta1), ob2 = static_cast<T>(1.0 - cfg_.beta2);
        const T inv_bc1 = static_cast<T>(1.0 / bc1), inv_bc2 = static_cast<T>(1.0 / bc2);
        const T eps = static_cast<T>(cfg_.eps);
        const T lrt = static_cast<T>(lr);
        const T decay = static_cast<T>(lr * cfg_.weight_decay);

        for (std::size_t pi = 0; pi < params.count(); ++pi) {
            const Tensor<T>& g = grads[pi];
            Tensor<T>& theta = params.tensors[pi];
            if (!g.same_shape(theta)) {
                throw std::runtime_error("adamw: gradient shape mismatch for " + params.names[pi]);
            }
            if (!all_finite(g)) {
                throw std::runtime_error("adamw: non-finite gradient for " + params.names[pi]);
            }
            Tensor<T>& m = m_[pi];
            Tensor<T>& v = v_[pi];
            for (std::int64_t i = 0; i < theta.size(); ++i) {
                const T gi = g[i];
                m[i] = b1 * m[i] + ob1 * gi;
                v[i] = b2 * v[i] + ob2 * gi * gi;
                const T mhat = m[i] * inv_bc1;
                const T vhat = v[i] * inv_bc2;
                theta[i] -= lrt * (mhat / (std::sqrt(vhat) + eps)) + decay * theta[i];
            }
        }
    }

    std::int64_t steps_taken() const { return t_; }

private:
    AdamWConfig cfg_;
    std::vector<Tensor<T>> m_, v_;
    std::int64_t t_ = 0;
};

}  // namespace csattn
