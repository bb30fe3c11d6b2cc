#pragma once

#include <functional>

#include "csattn/tape.hpp"

namespace csattn {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::int64_t worst_index = -1;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
    bool passed = false;
};

// Compares the reverse-mode gradient of a scalar-valued function against
// central finite differences, coordinate by coordinate. 64-bit only; finite
// differences are unreliable in float.
//
// rel err per coordinate = |a - n| / max(|a|, |n|, 1e-8).
inline GradCheckReport grad_check(const std::function<Var<double>(Tape<double>&, Var<double>)>& f,
                                  const Tensor<double>& x, double step = 1e-5, double tol = 1e-4) {
    Tensor<double> analytic;
    {
        Tape<double> tape;
        Var<double> xv = tape.leaf(x, true);
        Var<double> y = f(tape, xv);
        if (tape.val(y).size() != 1) throw std::runtime_error("grad_check: f must be scalar-valued");
        tape.backward(y);
        analytic = tape.grad(xv);
    }

    auto eval = [&](const Tensor<double>& probe) {
        Tape<double> tape;
        Var<double> xv = tape.leaf(probe, false);
        Var<double> y = f(tape, xv);
        const double v = tape.val(y)[0];
        if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite evaluation during probing");
        return v;
    };

    GradCheckReport rep;
    Tensor<double> probe = x;
    for (std::int64_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + step;
        const double fp = eval(probe);
        probe[i] = orig - step;
        const double fm = eval(probe);
        probe[i] = orig;

        const double numeric = (fp - fm) / (2.0 * step);
        const double a = analytic[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        const double rel = std::abs(a - numeric) / denom;
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_index = i;
            rep.analytic_at_worst = a;
            rep.numeric_at_worst = numeric;
        }
    }
    rep.passed = rep.max_rel_err <= tol;
    return rep;
}

// Same check restricted to a subset of coordinates (used for parameter
// tensors of whole networks, where probing every weight is impractical).
inline GradCheckReport grad_check_coords(const std::function<Var<double>(Tape<double>&, Var<double>)>& f,
                                         const Tensor<double>& x, const std::vector<std::int64_t>& coords,
                                         double step = 1e-5, double tol = 1e-4) {
    Tensor<double> analytic;
    {
        Tape<double> tape;
        Var<double> xv = tape.leaf(x, true);
        Var<double> y = f(tape, xv);
        if (tape.val(y).size() != 1) throw std::runtime_error("grad_check: f must be scalar-valued");
        tape.backward(y);
        analytic = tape.grad(xv);
    }

    auto eval = [&](const Tensor<double>& probe) {
        Tape<double> tape;
        Var<double> xv = tape.leaf(probe, false);
        Var<double> y = f(tape, xv);
        const double v = tape.val(y)[0];
        if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite evaluation during probing");
        return v;
    };

    GradCheckReport rep;
    Tensor<double> probe = x;
    for (std::int64_t i : coords) {
        const double orig = probe[i];
        probe[i] = orig + step;
        const double fp = eval(probe);
        probe[i] = orig - step;
        const double fm = eval(probe);
        probe[i] = orig;

        const double numeric = (fp - fm) / (2.0 * step);
        const double a = analytic[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        const double rel = std::abs(a - numeric) / denom;
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_index = i;
            rep.analytic_at_worst = a;
            rep.numeric_at_worst = numeric;
        }
    }
    rep.passed = rep.max_rel_err <= tol;
    return rep;
}

}  // namespace csattn
