#pragma once

// Scenario-wise bounds on the optimal quantile, scenario fixing and big-M
// coefficients for the mixed-integer models.

#include "qmdp/evaluation.hpp"
#include "qmdp/quantile.hpp"

#include <Eigen/Dense>

#include <future>
#include <optional>
#include <ostream>

namespace qmdp {

enum class ScenarioFix { free, forced0, forced1 };

inline const char* to_string(ScenarioFix f) {
    switch (f) {
    case ScenarioFix::forced0: return "forced0";
    case ScenarioFix::forced1: return "forced1";
    default: return "free";
    }
}

struct BoundsCache {
    double alpha = 1.0;
    numvec probs;
    numvec b_bar;   ///< per-scenario maximum expected cost over policies
    numvec b_under; ///< per-scenario minimum expected cost over policies
    Eigen::MatrixXd v_bar;   ///< state x scenario, maximum value function
    Eigen::MatrixXd v_under; ///< state x scenario, minimum value function
    double b_l = 0.0; ///< VaR_alpha(b_under), lower bound on the optimum
    double b_u = 0.0; ///< VaR_alpha(b_bar), upper bound on the optimum
    std::vector<ScenarioFix> z_fixed;
    double big_m_global = 0.0;       ///< b_u - b_l
    numvec big_m_scenario;           ///< max(0, b_bar[s] - b_l), see quantile rows in the exporter
    Eigen::MatrixXd big_m_state;     ///< v_bar - v_under

    std::size_t n_scenarios() const { return b_bar.size(); }
    std::size_t n_states() const { return static_cast<std::size_t>(v_bar.rows()); }

    /// Value-function bounds used for McCormick envelopes.
    double lower(std::size_t i, std::size_t s) const { return v_under(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)); }
    double upper(std::size_t i, std::size_t s) const { return v_bar(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)); }
    double big_m(std::size_t i, std::size_t s) const { return big_m_state(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)); }

    double forced_mass(ScenarioFix kind) const {
        double p = 0.0;
        for (std::size_t s = 0; s < z_fixed.size(); ++s)
            if (z_fixed[s] == kind) p += probs[s];
        return p;
    }
};

struct BoundsOptions {
    double tol = kDefaultTol;
    bool parallel = false; ///< solve scenarios concurrently
};

inline BoundsCache compute_bounds(const UncertainMdp& mdp, double alpha,
                                  const BoundsOptions& opt = {}) {
    check_alpha(alpha);
    const std::size_t n = mdp.n_states(), S = mdp.n_scenarios();
    BoundsCache c;
    c.alpha = alpha;
    c.probs = mdp.probs();
    c.b_bar.resize(S);
    c.b_under.resize(S);
    c.v_bar.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(S));
    c.v_under.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(S));

    auto solve = [&](std::size_t s) {
        return std::pair{optimal_value(mdp, s, Sense::max, opt.tol),
                         optimal_value(mdp, s, Sense::min, opt.tol)};
    };
    std::vector<std::pair<OptimalValue, OptimalValue>> sols;
    sols.reserve(S);
    if (opt.parallel && S > 1) {
        std::vector<std::future<std::pair<OptimalValue, OptimalValue>>> jobs;
        for (std::size_t s = 0; s < S; ++s) jobs.push_back(std::async(std::launch::async, solve, s));
        for (auto& j : jobs) sols.push_back(j.get());
    } else {
        for (std::size_t s = 0; s < S; ++s) sols.push_back(solve(s));
    }

    for (std::size_t s = 0; s < S; ++s) {
        const auto& [hi, lo] = sols[s];
        c.b_bar[s] = hi.value;
        c.b_under[s] = lo.value;
        for (std::size_t i = 0; i < n; ++i) {
            c.v_bar(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = hi.values[i];
            c.v_under(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = lo.values[i];
        }
    }
    c.b_u = var_alpha(c.b_bar, c.probs, alpha).value;
    c.b_l = var_alpha(c.b_under, c.probs, alpha).value;
    c.z_fixed.assign(S, ScenarioFix::free);
    c.big_m_global = c.b_u - c.b_l;
    c.big_m_scenario.resize(S);
    for (std::size_t s = 0; s < S; ++s) c.big_m_scenario[s] = std::max(0.0, c.b_bar[s] - c.b_l);
    c.big_m_state = c.v_bar - c.v_under;
    return c;
}

/// Same per-scenario bounds re-summarized at another alpha; clears any fixing.
inline BoundsCache with_alpha(const BoundsCache& cache, double alpha) {
    check_alpha(alpha);
    BoundsCache c = cache;
    c.alpha = alpha;
    c.b_u = var_alpha(c.b_bar, c.probs, alpha).value;
    c.b_l = var_alpha(c.b_under, c.probs, alpha).value;
    c.z_fixed.assign(c.n_scenarios(), ScenarioFix::free);
    c.big_m_global = c.b_u - c.b_l;
    for (std::size_t s = 0; s < c.n_scenarios(); ++s) c.big_m_scenario[s] = std::max(0.0, c.b_bar[s] - c.b_l);
    return c;
}

/// Marks scenarios that cannot (forced0) or must (forced1) lie inside the
/// alpha-cover of an optimal solution.
inline BoundsCache fix_scenarios(const BoundsCache& cache,
                                 std::optional<double> incumbent_ub = std::nullopt) {
    BoundsCache c = cache;
    const double ub = incumbent_ub ? std::min(c.b_u, *incumbent_ub) : c.b_u;
    for (std::size_t s = 0; s < c.n_scenarios(); ++s) {
        const bool zero = c.b_under[s] > ub;
        const bool one = c.b_bar[s] < c.b_l;
        if (zero && one)
            throw Error("fix_scenarios: scenario " + std::to_string(s) +
                        " is both forced in and forced out; bounds are inconsistent");
        c.z_fixed[s] = zero ? ScenarioFix::forced0 : one ? ScenarioFix::forced1 : ScenarioFix::free;
    }
    if (c.forced_mass(ScenarioFix::forced0) > 1.0 - c.alpha + kCoverTolerance)
        throw Error("fix_scenarios: scenarios forced out carry more than 1 - alpha probability");
    return c;
}

/// Right-hand side of the valid inequality y >= b_under[s] z^s.
inline double valid_lb_cut(const BoundsCache& cache, std::size_t s) { return cache.b_under.at(s); }

/// Diagnostic dump: scenario, b_under, b_bar, fixed status.
inline void write_bounds_csv(std::ostream& os, const BoundsCache& c) {
    const auto old = os.precision(17);
    os << "scenario,b_under,b_bar,status\n";
    for (std::size_t s = 0; s < c.n_scenarios(); ++s)
        os << s << ',' << c.b_under[s] << ',' << c.b_bar[s] << ',' << to_string(c.z_fixed[s]) << '\n';
    os.precision(old);
}

} // namespace qmdp
