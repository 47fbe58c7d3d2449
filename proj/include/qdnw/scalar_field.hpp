#pragma once

#include <functional>
#include <string>

#include "qdnw/linalg.hpp"

namespace qdnw {

/// Smooth real function on coordinates together with its coordinate gradient.
struct ScalarField {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
    /// True when the function does not depend on the time coordinate x^0.
    bool static_in_time = false;
    std::string description;

    double operator()(const Vec& x) const { return value(x); }

    static ScalarField constant(double c);
    /// c + slope . x
    static ScalarField affine(double c, const Vec& slope);
    /// amplitude * exp(-|x - center|^2 / width^2), optionally ignoring x^0.
    static ScalarField gaussian(double amplitude, const Vec& center, double width, bool spatial_only);
};

}  // namespace qdnw
