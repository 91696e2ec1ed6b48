#include "crackdet/nn.hpp"

#include <cmath>

namespace crackdet::ad {

void he_init(Parameter& p, int fan_in, Rng& rng) {
    const double stddev = std::sqrt(2.0 / fan_in);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value[i] = stddev * rng.normal();
}

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter* p : params_) {
        m_.push_back(Eigen::ArrayXd::Zero(p->value.size()));
        v_.push_back(Eigen::ArrayXd::Zero(p->value.size()));
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Parameter& p = *params_[i];
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad.square();
        p.value -= cfg_.lr * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + cfg_.eps);
    }
}

void Adam::zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
}

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::vector<Parameter*>& params, double h,
                           int max_coords, std::uint64_t seed) {
    std::vector<std::pair<Parameter*, Eigen::Index>> coords;
    for (Parameter* p : params)
        for (Eigen::Index i = 0; i < p->value.size(); ++i) coords.emplace_back(p, i);

    Rng rng(seed);
    if (static_cast<int>(coords.size()) > max_coords) {
        rng.shuffle(coords.data(), coords.size());
        coords.resize(static_cast<std::size_t>(max_coords));
    }

    double scale = 0.0;
    for (auto& [p, i] : coords) scale = std::max(scale, std::abs(p->grad[i]));
    const double floor = std::max(1e-3 * scale, 1e-12);

    GradCheckReport rep;
    for (auto& [p, i] : coords) {
        const double saved = p->value[i];
        p->value[i] = saved + h;
        const double up = loss();
        p->value[i] = saved - h;
        const double down = loss();
        p->value[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = p->grad[i];
        const double rel =
            std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
        rep.max_rel_error = std::max(rep.max_rel_error, rel);
        ++rep.coords_checked;
    }
    return rep;
}

}  // namespace crackdet::ad
