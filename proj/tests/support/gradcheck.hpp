#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gsat/core/rng.hpp"
#include "gsat/core/tape.hpp"

namespace gsat::testing {

/// Builds some output from the given parameter vars.
using Forward = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Reduces an output to a scalar with fixed pseudo-random weights, so every
/// output entry contributes a distinct amount.
inline Var weighted_sum(Tape& tape, Var x, std::uint64_t seed) {
    const auto& v = tape.value(x);
    DenseMatrix w(v.rows(), v.cols());
    Rng rng(seed);
    for (auto& e : w.data()) e = rng.uniform(0.5, 1.5);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += w.data()[i] * v.data()[i];
    return tape.push(DenseMatrix(1, 1, s), {x}, [x, w](Tape& t, const DenseMatrix& g) { t.accumulate(x, w * g(0, 0)); });
}

struct GradCheck {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

/// Central differences against the tape gradient for every input entry.
/// Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheck gradient_check(const std::vector<DenseMatrix>& inputs, const Forward& f, double h = 1e-5,
                                double floor = 1e-6, std::uint64_t weight_seed = 17) {
    auto eval = [&](const std::vector<DenseMatrix>& xs) {
        Tape tape;
        std::vector<Var> vars;
        for (const auto& x : xs) vars.push_back(tape.parameter(x));
        return tape.value(weighted_sum(tape, f(tape, vars), weight_seed))(0, 0);
    };

    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : inputs) vars.push_back(tape.parameter(x));
    const Var loss = weighted_sum(tape, f(tape, vars), weight_seed);
    tape.backward(loss);

    GradCheck out;
    std::vector<DenseMatrix> probe = inputs;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const DenseMatrix analytic = tape.grad(vars[k]);
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double x0 = inputs[k].data()[i];
            probe[k].data()[i] = x0 + h;
            const double up = eval(probe);
            probe[k].data()[i] = x0 - h;
            const double down = eval(probe);
            probe[k].data()[i] = x0;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic.data()[i];
            const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
            out.max_rel_err = std::max(out.max_rel_err, err);
            ++out.checked;
        }
    }
    return out;
}

}  // namespace gsat::testing
