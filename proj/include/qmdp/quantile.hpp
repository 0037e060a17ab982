#pragma once

// Value-at-risk (alpha-quantile) over a finite scenario distribution.

#include "qmdp/evaluation.hpp"
#include "qmdp/mdp.hpp"

#include <algorithm>
#include <numeric>

namespace qmdp {

struct WeightedSample {
    std::span<const double> values;
    std::span<const double> probs;
    double alpha = 1.0;
};

struct VarResult {
    double value = 0.0;
    std::size_t cut = 0; ///< number of ordered scenarios needed to reach alpha
    indvec order;        ///< scenario indices sorted by value, ties by index

    /// Scenarios in the ordered prefix, i.e. those with z^s = 1.
    indvec satisfied() const { return indvec(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut)); }
};

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw Error("alpha = " + detail::fmt_double(alpha) + " outside (0,1]");
}

/// Smallest value y in the sample such that P(X <= y) >= alpha.
inline VarResult var_alpha(const WeightedSample& sample) {
    check_alpha(sample.alpha);
    if (sample.values.empty()) throw Error("var_alpha: empty sample");
    if (sample.values.size() != sample.probs.size())
        throw Error("var_alpha: values and probabilities differ in length");

    const std::size_t n = sample.values.size();
    VarResult r;
    r.order.resize(n);
    std::iota(r.order.begin(), r.order.end(), std::size_t{0});
    std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t x, std::size_t y) {
        return sample.values[x] < sample.values[y];
    });

    if (sample.alpha >= 1.0) {
        r.cut = n;
        r.value = sample.values[r.order.back()];
        return r;
    }
    double cum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        cum += sample.probs[r.order[k]];
        if (cum >= sample.alpha - kCoverTolerance) {
            r.cut = k + 1;
            r.value = sample.values[r.order[k]];
            return r;
        }
    }
    // Only reachable when probs sum to slightly less than alpha.
    r.cut = n;
    r.value = sample.values[r.order.back()];
    return r;
}

inline VarResult var_alpha(std::span<const double> values, std::span<const double> probs,
                           double alpha) {
    return var_alpha(WeightedSample{values, probs, alpha});
}

struct PolicyVar {
    double value = 0.0;
    indvec satisfied;   ///< scenario indices with z^s = 1, in value order
    numvec costs;       ///< expected_cost per scenario
};

/// Per-scenario expected costs of a policy.
inline numvec scenario_costs(const UncertainMdp& mdp, const Policy& pol,
                             const EvalOptions& opt = {}) {
    numvec costs(mdp.n_scenarios());
    for (std::size_t s = 0; s < mdp.n_scenarios(); ++s) costs[s] = expected_cost(mdp, s, pol, opt);
    return costs;
}

inline PolicyVar var_of_policy(const UncertainMdp& mdp, const Policy& pol, double alpha,
                               const EvalOptions& opt = {}) {
    check_alpha(alpha);
    PolicyVar out;
    out.costs = scenario_costs(mdp, pol, opt);
    const auto r = var_alpha(out.costs, mdp.probs(), alpha);
    out.value = r.value;
    out.satisfied = r.satisfied();
    return out;
}

inline double total_prob(const UncertainMdp& mdp, std::span<const std::size_t> scenarios) {
    double p = 0.0;
    for (std::size_t s : scenarios) p += mdp.prob(s);
    return p;
}

} // namespace qmdp
