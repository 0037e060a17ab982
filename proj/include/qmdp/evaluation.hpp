#pragma once

// Per-scenario evaluation: policy evaluation, optimal value functions and a
// policy-iteration solver over restricted action sets.

#include "qmdp/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace qmdp {

using ValueFunction = numvec;

enum class Sense { min, max };

enum class EvalMethod {
    automatic, ///< dense LU up to kDirectSolveLimit states, successive approximation above
    direct,
    iterative
};

inline constexpr std::size_t kDirectSolveLimit = 512;
inline constexpr double kDefaultTol = 1e-8;

struct EvalOptions {
    double tol = kDefaultTol;
    EvalMethod method = EvalMethod::automatic;
};

namespace detail {

inline double sup_norm_diff(const numvec& x, const numvec& y) {
    double d = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) d = std::max(d, std::abs(x[k] - y[k]));
    return d;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
    double r = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) r += x[k] * y[k];
    return r;
}

/// Sup-norm step below which successive approximation stops: tol (1 - gamma) / gamma.
inline double stopping_threshold(double tol, double gamma) {
    return gamma > 0.0 ? tol * (1.0 - gamma) / gamma : std::numeric_limits<double>::infinity();
}

inline void require_finite(const numvec& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw Error(std::string(what) + ": non-finite value encountered");
}

/// Policy-induced cost vector and row-major transition matrix.
struct InducedChain {
    numvec cost;
    numvec trans;
};

inline InducedChain induced_chain(const ScenarioParams& sc, const Policy& pol) {
    const std::size_t n = sc.n_states(), m = sc.n_actions();
    InducedChain ch{numvec(n, 0.0), numvec(n * n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < m; ++a) {
            const double w = pol.weight(i, a);
            ch.cost[i] += w * sc.cost(i, a);
            const auto row = sc.row(i, a);
            for (std::size_t j = 0; j < n; ++j) ch.trans[i * n + j] += w * row[j];
        }
    }
    return ch;
}

inline InducedChain induced_chain(const ScenarioParams& sc, const indvec& actions) {
    const std::size_t n = sc.n_states();
    InducedChain ch{numvec(n), numvec(n * n)};
    for (std::size_t i = 0; i < n; ++i) {
        ch.cost[i] = sc.cost(i, actions[i]);
        const auto row = sc.row(i, actions[i]);
        std::copy(row.begin(), row.end(), ch.trans.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
    return ch;
}

inline numvec apply_chain(const InducedChain& ch, double gamma, const numvec& v) {
    const std::size_t n = v.size();
    numvec out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = ch.cost[i] + gamma * dot({ch.trans.data() + i * n, n}, v);
    return out;
}

inline numvec solve_direct(const InducedChain& ch, double gamma) {
    const auto n = static_cast<Eigen::Index>(ch.cost.size());
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        rhs(i) = ch.cost[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j)
            lhs(i, j) -= gamma * ch.trans[static_cast<std::size_t>(i * n + j)];
    }
    Eigen::VectorXd v = lhs.partialPivLu().solve(rhs);
    return numvec(v.data(), v.data() + n);
}

inline numvec solve_iterative(const InducedChain& ch, double gamma, double tol) {
    const double thr = stopping_threshold(tol, gamma);
    numvec v(ch.cost.size(), 0.0);
    while (true) {
        numvec next = apply_chain(ch, gamma, v);
        require_finite(next, "policy evaluation");
        const double step = sup_norm_diff(next, v);
        v = std::move(next);
        if (step < thr) return v;
    }
}

/// Solves v = c + gamma P v and polishes until the fixed-point residual is at most tol.
inline numvec solve_chain(const InducedChain& ch, double gamma, const EvalOptions& opt) {
    const bool direct = opt.method == EvalMethod::direct ||
                        (opt.method == EvalMethod::automatic && ch.cost.size() <= kDirectSolveLimit);
    numvec v = direct ? solve_direct(ch, gamma) : solve_iterative(ch, gamma, opt.tol);
    require_finite(v, "policy evaluation");
    for (int k = 0; k < 64; ++k) {
        numvec next = apply_chain(ch, gamma, v);
        if (sup_norm_diff(next, v) <= opt.tol) break;
        v = std::move(next);
    }
    return v;
}

inline double q_value(const ScenarioParams& sc, double gamma, std::size_t i, std::size_t a,
                      const numvec& v) {
    return sc.cost(i, a) + gamma * dot(sc.row(i, a), v);
}

} // namespace detail

/// Fixed point of the Bellman operator of `pol` under scenario s.
inline ValueFunction evaluate_policy(const UncertainMdp& mdp, std::size_t s, const Policy& pol,
                                     const EvalOptions& opt = {}) {
    check_scenario_index(mdp, s);
    check_policy_dims(mdp, pol);
    if (!(opt.tol > 0.0)) throw Error("evaluate_policy: tolerance must be positive");
    return detail::solve_chain(detail::induced_chain(mdp.scenario(s), pol), mdp.gamma(), opt);
}

/// Sup-norm residual of v against the policy's Bellman operator.
inline double bellman_residual(const UncertainMdp& mdp, std::size_t s, const Policy& pol,
                               const ValueFunction& v) {
    const auto ch = detail::induced_chain(mdp.scenario(s), pol);
    return detail::sup_norm_diff(detail::apply_chain(ch, mdp.gamma(), v), v);
}

/// Expected total discounted cost q . v of `pol` under scenario s.
inline double expected_cost(const UncertainMdp& mdp, std::size_t s, const Policy& pol,
                            const EvalOptions& opt = {}) {
    return detail::dot(mdp.q(), evaluate_policy(mdp, s, pol, opt));
}

struct OptimalValue {
    ValueFunction values;
    Policy policy; ///< greedy deterministic policy, ties to the smallest action index
    double value = 0.0; ///< q . values
    std::size_t iterations = 0;
};

/// Value iteration for the per-scenario minimum (or maximum) value function.
///
/// The min iteration starts at zero and the max iteration at max_cost / (1 - gamma),
/// so with nonnegative costs the returned values approach the optimum monotonically
/// from below (min) and from above (max).
inline OptimalValue optimal_value(const UncertainMdp& mdp, std::size_t s, Sense sense,
                                  double tol = kDefaultTol) {
    check_scenario_index(mdp, s);
    if (!(tol > 0.0)) throw Error("optimal_value: tolerance must be positive");
    const auto& sc = mdp.scenario(s);
    const std::size_t n = mdp.n_states(), m = mdp.n_actions();
    const double gamma = mdp.gamma();

    numvec v(n, 0.0);
    if (sense == Sense::max) {
        double cmax = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < m; ++a) cmax = std::max(cmax, sc.cost(i, a));
        std::fill(v.begin(), v.end(), cmax / (1.0 - gamma));
    }

    const double thr = detail::stopping_threshold(tol, gamma);
    OptimalValue out;
    while (true) {
        numvec next(n);
        for (std::size_t i = 0; i < n; ++i) {
            double best = detail::q_value(sc, gamma, i, 0, v);
            for (std::size_t a = 1; a < m; ++a) {
                const double qa = detail::q_value(sc, gamma, i, a, v);
                best = sense == Sense::min ? std::min(best, qa) : std::max(best, qa);
            }
            next[i] = best;
        }
        detail::require_finite(next, "value iteration");
        ++out.iterations;
        const double step = detail::sup_norm_diff(next, v);
        v = std::move(next);
        if (step < thr) break;
    }

    indvec actions(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double best = detail::q_value(sc, gamma, i, 0, v);
        for (std::size_t a = 1; a < m; ++a) {
            const double qa = detail::q_value(sc, gamma, i, a, v);
            if (sense == Sense::min ? qa < best : qa > best) {
                best = qa;
                actions[i] = a;
            }
        }
    }
    out.value = detail::dot(mdp.q(), v);
    out.values = std::move(v);
    out.policy = Policy::deterministic(std::move(actions), m);
    return out;
}

/// Inclusive interval of admissible action indices for one state.
struct ActionRange {
    std::size_t lo = 0;
    std::size_t hi = 0;

    bool contains(std::size_t a) const { return lo <= a && a <= hi; }
};

struct RestrictedSolution {
    ValueFunction values;
    indvec actions;
    double value = 0.0;
};

/// Minimum-cost value function when state i may only use actions in ranges[i].
/// Howard policy iteration with exact (LU) evaluation; `start` seeds the policy
/// and is clamped into the ranges.
inline RestrictedSolution restricted_min_value(const UncertainMdp& mdp, std::size_t s,
                                               std::span<const ActionRange> ranges,
                                               const indvec* start = nullptr) {
    const auto& sc = mdp.scenario(s);
    const std::size_t n = mdp.n_states();
    const double gamma = mdp.gamma();

    indvec act(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (start) {
            act[i] = std::clamp((*start)[i], ranges[i].lo, ranges[i].hi);
        } else {
            act[i] = ranges[i].lo;
            for (std::size_t a = ranges[i].lo + 1; a <= ranges[i].hi; ++a)
                if (sc.cost(i, a) < sc.cost(i, act[i])) act[i] = a;
        }
    }

    const EvalOptions eval{1e-12, EvalMethod::automatic};
    numvec v;
    for (std::size_t iter = 0;; ++iter) {
        v = detail::solve_chain(detail::induced_chain(sc, act), gamma, eval);
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const double current = detail::q_value(sc, gamma, i, act[i], v);
            const double slack = 1e-12 * (1.0 + std::abs(current));
            std::size_t best_a = act[i];
            double best = current - slack;
            for (std::size_t a = ranges[i].lo; a <= ranges[i].hi; ++a) {
                const double qa = detail::q_value(sc, gamma, i, a, v);
                if (qa < best) {
                    best = qa;
                    best_a = a;
                }
            }
            if (best_a != act[i]) {
                act[i] = best_a;
                changed = true;
            }
        }
        if (!changed || iter > 10 * n * mdp.n_actions() + 100) break;
    }
    RestrictedSolution out;
    out.value = detail::dot(mdp.q(), v);
    out.values = std::move(v);
    out.actions = std::move(act);
    return out;
}

} // namespace qmdp
