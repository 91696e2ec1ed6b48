#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "crackdet/errors.hpp"

namespace crackdet::ad {

// (batch, channels, height, width), row-major within each plane:
// flat index = ((n*C + c)*H + y)*W + x
struct Shape {
    int n = 1, c = 1, h = 1, w = 1;

    Eigen::Index count() const {
        return static_cast<Eigen::Index>(n) * c * h * w;
    }
    bool operator==(const Shape&) const = default;
    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
};

struct Tensor {
    Shape shape;
    Eigen::ArrayXd data;

    Tensor() = default;
    Tensor(Shape s, Eigen::ArrayXd d) : shape(s), data(std::move(d)) {
        if (data.size() != shape.count()) throw ShapeMismatch("tensor data length != shape count");
    }
    static Tensor zeros(Shape s) { return Tensor(s, Eigen::ArrayXd::Zero(s.count())); }
    static Tensor full(Shape s, double v) { return Tensor(s, Eigen::ArrayXd::Constant(s.count(), v)); }
};

// Persistent, named value/gradient pair; outlives the per-step tapes.
struct Parameter {
    std::string name;
    Shape shape;
    Eigen::ArrayXd value;
    Eigen::ArrayXd grad;

    Parameter() = default;
    Parameter(std::string nm, Shape s)
        : name(std::move(nm)),
          shape(s),
          value(Eigen::ArrayXd::Zero(s.count())),
          grad(Eigen::ArrayXd::Zero(s.count())) {}

    void zero_grad() { grad.setZero(); }
};

// Batch-norm running statistics; updated in training mode, used in eval mode.
struct BnStats {
    std::string name;
    Eigen::ArrayXd running_mean;
    Eigen::ArrayXd running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    BnStats() = default;
    BnStats(std::string nm, int channels)
        : name(std::move(nm)),
          running_mean(Eigen::ArrayXd::Zero(channels)),
          running_var(Eigen::ArrayXd::Ones(channels)) {}
};

}  // namespace crackdet::ad
