#include "kgrec/numeric/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "kgrec/errors.hpp"
#include "kgrec/numeric/rng.hpp"

namespace kgrec::numeric {

double relative_error(double analytic, double numeric) noexcept {
    return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckReport finite_diff_check(const LossFunction& loss, ParamStore& params, const GradCheckOptions& options) {
    if (!(options.epsilon > 0.0)) throw Error("finite_diff_check: epsilon must be > 0");
    const LossProbe base = loss(true);
    std::vector<Matrix> analytic;
    for (const auto& p : params) analytic.push_back(p.grad);

    Rng rng(options.seed);
    GradCheckReport report;
    std::size_t k = 0;
    for (auto& p : params) {
        std::vector<std::size_t> coords(p.value.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (options.max_coords_per_param != 0 && coords.size() > options.max_coords_per_param) {
            rng.shuffle(coords);
            coords.resize(options.max_coords_per_param);
            std::sort(coords.begin(), coords.end());
        }
        for (std::size_t i : coords) {
            const double saved = p.value[i];
            p.value[i] = saved + options.epsilon;
            const LossProbe plus = loss(false);
            p.value[i] = saved - options.epsilon;
            const LossProbe minus = loss(false);
            p.value[i] = saved;
            if (plus.kink_signature != base.kink_signature || minus.kink_signature != base.kink_signature) {
                ++report.skipped_kinks;
                continue;
            }
            const double numeric = (plus.value - minus.value) / (2.0 * options.epsilon);
            const double err = relative_error(analytic[k][i], numeric);
            ++report.checked;
            if (err > report.max_rel_error || report.worst_param.empty()) {
                report.max_rel_error = err;
                report.worst_param = p.name;
                report.worst_index = i;
            }
        }
        ++k;
    }
    // Leave the analytic gradients in place for the caller.
    k = 0;
    for (auto& p : params) p.grad = analytic[k++];
    return report;
}

}  // namespace kgrec::numeric
