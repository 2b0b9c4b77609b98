#include "fga/gradcheck.hpp"

#include <cmath>

namespace fga {

namespace {

double eval_scalar(const ScalarProgram& f, const Tensor& x) {
    Tape t;
    const NodeId in = t.constant(x);
    const NodeId out = f(t, in);
    const Tensor& v = t.value(out);
    if (v.size() != 1) throw ValueError("finite_diff_check program must be scalar-valued");
    return v[0];
}

} // namespace

double finite_diff_check(const ScalarProgram& f, const Tensor& x, double step) {
    if (step <= 0.0) throw ValueError("finite_diff_check step must be positive");

    Tensor analytic;
    {
        Tape t;
        const NodeId in = t.input(x);
        const NodeId out = f(t, in);
        if (t.value(out).size() != 1) throw ValueError("finite_diff_check program must be scalar-valued");
        t.backward(out);
        analytic = t.grad(in);
    }

    double worst = 0.0;
    Tensor probe = x;
    for (std::int64_t i = 0; i < x.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + step;
        const double up = eval_scalar(f, probe);
        probe[i] = saved - step;
        const double down = eval_scalar(f, probe);
        probe[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace fga
