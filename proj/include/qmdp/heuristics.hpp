#pragma once

// Feasible-policy heuristics: the mean-value policy and scenario selection
// followed by robust value iteration over the selected scenarios.

#include "qmdp/evaluation.hpp"
#include "qmdp/preprocess.hpp"
#include "qmdp/quantile.hpp"

#include <limits>

namespace qmdp {

/// Greedy policy of the single MDP with probability-weighted average parameters.
inline Policy mean_value_policy(const UncertainMdp& mdp, double tol = kDefaultTol) {
    const std::size_t n = mdp.n_states(), m = mdp.n_actions();
    ScenarioParams avg(n, m);
    for (std::size_t s = 0; s < mdp.n_scenarios(); ++s) {
        const auto& sc = mdp.scenario(s);
        const double p = mdp.prob(s);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < m; ++a) {
                avg.cost(i, a) += p * sc.cost(i, a);
                for (std::size_t j = 0; j < n; ++j) avg.trans(i, a, j) += p * sc.trans(i, a, j);
            }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < m; ++a) {
            auto row = avg.row(i, a);
            double sum = 0.0;
            for (double x : row) sum += x;
            for (double& x : row) x /= sum;
        }
    const UncertainMdp mean(mdp.gamma(), mdp.q(), {avg}, {1.0});
    return optimal_value(mean, 0, Sense::min, tol).policy;
}

struct ScenarioSelection {
    std::vector<bool> z;
    double selected_prob = 0.0;

    indvec selected() const {
        indvec out;
        for (std::size_t s = 0; s < z.size(); ++s)
            if (z[s]) out.push_back(s);
        return out;
    }
};

/// Minimal alpha-cover among the lowest-b_under scenarios: the ordered prefix up to
/// VaR_alpha(b_under), thinned (largest first) while the cover stays >= alpha.
inline ScenarioSelection select_scenarios(const numvec& b_under, const numvec& probs, double alpha) {
    const auto r = var_alpha(b_under, probs, alpha);
    ScenarioSelection sel;
    sel.z.assign(b_under.size(), false);
    for (std::size_t k = 0; k < r.cut; ++k) {
        sel.z[r.order[k]] = true;
        sel.selected_prob += probs[r.order[k]];
    }
    for (std::size_t k = r.cut; k-- > 0;) {
        const std::size_t s = r.order[k];
        if (sel.selected_prob - probs[s] >= alpha - kCoverTolerance) {
            sel.z[s] = false;
            sel.selected_prob -= probs[s];
        }
    }
    return sel;
}

struct RobustResult {
    Policy policy;
    ValueFunction values;
    std::size_t iterations = 0;
    double last_step = 0.0;    ///< sup-norm of the final update
    double threshold = 0.0;    ///< (1 - gamma) eps / gamma
    numvec step_history;
};

inline constexpr double kDefaultRobustEps = 1e-6;

/// Robust value iteration v(i) = min_a max_{s in S(z)} { c_i^s(a) + gamma P_i^s(a) v }.
/// Returns the greedy (value-minimizing) deterministic policy of the last sweep.
inline RobustResult robust_policy_selection(const UncertainMdp& mdp, const std::vector<bool>& z,
                                            double eps = kDefaultRobustEps) {
    if (z.size() != mdp.n_scenarios()) throw Error("robust_policy_selection: z has wrong length");
    if (!(eps > 0.0)) throw Error("robust_policy_selection: eps must be positive");
    indvec sel;
    for (std::size_t s = 0; s < z.size(); ++s)
        if (z[s]) sel.push_back(s);
    if (sel.empty()) throw Error("robust_policy_selection: no scenario selected");

    const std::size_t n = mdp.n_states(), m = mdp.n_actions();
    const double gamma = mdp.gamma();

    // Start from the largest immediate cost of each state over the selected
    // scenarios, discounted to an infinite horizon; the start must be positive.
    numvec v(n);
    for (std::size_t i = 0; i < n; ++i) {
        double c = 0.0;
        for (std::size_t s : sel)
            for (std::size_t a = 0; a < m; ++a) c = std::max(c, mdp.scenario(s).cost(i, a));
        v[i] = c > 0.0 ? c / (1.0 - gamma) : 1.0;
    }

    RobustResult out;
    out.threshold = detail::stopping_threshold(eps, gamma);
    indvec actions(n, 0);
    while (true) {
        numvec next(n);
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < m; ++a) {
                double sigma = -std::numeric_limits<double>::infinity();
                for (std::size_t s : sel)
                    sigma = std::max(sigma, detail::q_value(mdp.scenario(s), gamma, i, a, v));
                if (sigma < best) {
                    best = sigma;
                    actions[i] = a;
                }
            }
            next[i] = best;
        }
        detail::require_finite(next, "robust value iteration");
        const double step = detail::sup_norm_diff(next, v);
        out.step_history.push_back(step);
        ++out.iterations;
        v = std::move(next);
        out.last_step = step;
        if (step < out.threshold) break;
    }
    out.values = std::move(v);
    out.policy = Policy::deterministic(std::move(actions), m);
    return out;
}

struct InitialSolutionOptions {
    double eps = kDefaultRobustEps;
    bool local_search = false;       ///< single-swap hill climbing on the selection
    std::size_t max_swaps = 100;
};

struct HeuristicResult {
    Policy policy;
    double value = 0.0; ///< VaR_alpha over all scenarios
    ScenarioSelection selection;
    RobustResult robust;
};

/// Scenario selection on b_under followed by robust_policy_selection.
inline HeuristicResult initial_solution(const UncertainMdp& mdp, const BoundsCache& cache,
                                        double alpha, const InitialSolutionOptions& opt = {}) {
    check_alpha(alpha);
    if (cache.n_scenarios() != mdp.n_scenarios()) throw Error("initial_solution: cache does not match model");
    HeuristicResult best;
    best.selection = select_scenarios(cache.b_under, mdp.probs(), alpha);
    best.robust = robust_policy_selection(mdp, best.selection.z, opt.eps);
    best.policy = best.robust.policy;
    best.value = var_of_policy(mdp, best.policy, alpha).value;
    if (!opt.local_search) return best;

    for (std::size_t swaps = 0; swaps < opt.max_swaps; ++swaps) {
        bool improved = false;
        const auto cur = best.selection;
        for (std::size_t out_s = 0; out_s < cur.z.size() && !improved; ++out_s) {
            if (!cur.z[out_s]) continue;
            for (std::size_t in_s = 0; in_s < cur.z.size() && !improved; ++in_s) {
                if (cur.z[in_s]) continue;
                ScenarioSelection cand = cur;
                cand.z[out_s] = false;
                cand.z[in_s] = true;
                cand.selected_prob += mdp.prob(in_s) - mdp.prob(out_s);
                if (cand.selected_prob < alpha - kCoverTolerance) continue;
                auto rob = robust_policy_selection(mdp, cand.z, opt.eps);
                const double val = var_of_policy(mdp, rob.policy, alpha).value;
                if (val < best.value - 1e-9) {
                    best = {rob.policy, val, cand, std::move(rob)};
                    improved = true;
                }
            }
        }
        if (!improved) break;
    }
    return best;
}

} // namespace qmdp
