#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "stcd/tensor.hpp"

namespace stcd {

struct GradCheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    int checked = 0;
    int skipped = 0;  // non-differentiable points detected and excluded
    std::string worst;
};

struct GradCheckOptions {
    double rtol = 1e-4;
    double step = 1e-5;
    // Check at most this many coordinates (randomly chosen, seeded);
    // <= 0 checks every coordinate.
    int max_coords = -1;
    uint64_t seed = 0;
};

// Compares the autodiff gradient of the scalar f(x) against central finite
// differences, coordinate by coordinate. Coordinates where the two one-sided
// slopes disagree (kinks) are skipped and counted.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           const GradCheckOptions& opts = {});

// Random tensor in [lo, hi], deterministic per seed.
Tensor random_uniform(Shape shape, uint64_t seed, double lo = -2.0, double hi = 2.0,
                      bool requires_grad = false);

}  // namespace stcd
