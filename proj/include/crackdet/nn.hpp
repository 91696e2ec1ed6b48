#pragma once

#include <vector>

#include "crackdet/rng.hpp"
#include "crackdet/tensor.hpp"

namespace crackdet::ad {

// He Normal: N(0, 2/fan_in)
void he_init(Parameter& p, int fan_in, Rng& rng);

struct AdamConfig {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adaptive moment estimation with bias correction:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig cfg = {});

    void step();
    void zero_grad();
    int steps_taken() const { return t_; }

private:
    std::vector<Parameter*> params_;
    std::vector<Eigen::ArrayXd> m_, v_;
    AdamConfig cfg_;
    int t_ = 0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    int coords_checked = 0;
};

// Central-difference check against already-computed analytic gradients.
// `loss` must recompute the scalar objective from the parameters' current
// values. Samples up to max_coords coordinates across all parameters.
// The error denominator is floored at 1e-3 of the largest sampled analytic
// gradient so that near-zero coordinates do not dominate the relative error.
GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::vector<Parameter*>& params, double h,
                           int max_coords, std::uint64_t seed);

}  // namespace crackdet::ad
