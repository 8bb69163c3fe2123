#pragma once

#include <cmath>
#include <vector>

#include "kmp/tensor.hpp"

namespace kmp {

// Adam with bias correction and decoupled weight decay. One instance owns
// the moment buffers for a fixed parameter list; the parameter tensors
// themselves live in the model.
class Adam {
public:
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    Adam() = default;
    Adam(double lr_, double weight_decay_) : lr(lr_), weight_decay(weight_decay_) {}

    long step_count() const { return step_; }

    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
        if (params.size() != grads.size()) throw contract_error("Adam::step: param/grad count mismatch");
        if (m_.empty()) {
            m_.reserve(params.size());
            v_.reserve(params.size());
            for (const Tensor* p : params) {
                m_.emplace_back(p->rows, p->cols);
                v_.emplace_back(p->rows, p->cols);
            }
        }
        if (m_.size() != params.size()) throw contract_error("Adam::step: parameter list changed size");
        ++step_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            Tensor& p = *params[k];
            const Tensor& g = *grads[k];
            check_same_shape(p, g, "Adam::step");
            check_same_shape(p, m_[k], "Adam::step");
            for (std::size_t i = 0; i < p.size(); ++i) {
                m_[k].v[i] = beta1 * m_[k].v[i] + (1.0 - beta1) * g.v[i];
                v_[k].v[i] = beta2 * v_[k].v[i] + (1.0 - beta2) * g.v[i] * g.v[i];
                const double mhat = m_[k].v[i] / bc1;
                const double vhat = v_[k].v[i] / bc2;
                p.v[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p.v[i]);
            }
        }
    }

private:
    long step_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace kmp
