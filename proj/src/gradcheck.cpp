#include "remede/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace remede {

double finite_diff_check(const std::function<double()>& eval,
                         std::span<Tensor* const> params,
                         std::span<const Tensor> analytic, double step) {
    if (params.size() != analytic.size())
        throw std::invalid_argument("finite_diff_check: parameter/gradient count mismatch");
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& param = *params[p];
        if (!param.same_shape(analytic[p]))
            throw std::invalid_argument("finite_diff_check: gradient shape mismatch");
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double saved = param.values[i];
            param.values[i] = saved + step;
            const double fp = eval();
            param.values[i] = saved - step;
            const double fm = eval();
            param.values[i] = saved;
            const double fd = (fp - fm) / (2.0 * step);
            const double an = analytic[p].values[i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    }
    return worst;
}

double finite_diff_check(const std::function<double()>& eval, Tensor& param,
                         const Tensor& analytic, double step) {
    Tensor* ptr = &param;
    return finite_diff_check(eval, std::span<Tensor* const>(&ptr, 1),
                             std::span<const Tensor>(&analytic, 1), step);
}

}  // namespace remede
