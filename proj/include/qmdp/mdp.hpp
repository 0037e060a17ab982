#pragma once

// Data model for MDPs whose costs and transition probabilities are uncertain
// over a finite set of scenarios.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qmdp {

using numvec = std::vector<double>;
using indvec = std::vector<std::size_t>;

/// Tolerance used when checking that a probability vector sums to one.
inline constexpr double kSumTolerance = 1e-9;

/// Slack allowed when comparing cumulative scenario probability against alpha.
inline constexpr double kCoverTolerance = 1e-12;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when model data violates a structural invariant.
class InvalidModel : public Error {
public:
    using Error::Error;
};

/// One joint realization of the cost and transition tensors.
class ScenarioParams {
public:
    ScenarioParams() = default;
    ScenarioParams(std::size_t n_states, std::size_t n_actions)
        : n_states_(n_states), n_actions_(n_actions),
          cost_(n_states * n_actions, 0.0),
          trans_(n_states * n_actions * n_states, 0.0) {}

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }

    double cost(std::size_t i, std::size_t a) const { return cost_[i * n_actions_ + a]; }
    double& cost(std::size_t i, std::size_t a) { return cost_[i * n_actions_ + a]; }

    double trans(std::size_t i, std::size_t a, std::size_t j) const {
        return trans_[(i * n_actions_ + a) * n_states_ + j];
    }
    double& trans(std::size_t i, std::size_t a, std::size_t j) {
        return trans_[(i * n_actions_ + a) * n_states_ + j];
    }

    /// Next-state distribution for the state-action pair (i, a).
    std::span<const double> row(std::size_t i, std::size_t a) const {
        return {trans_.data() + (i * n_actions_ + a) * n_states_, n_states_};
    }
    std::span<double> row(std::size_t i, std::size_t a) {
        return {trans_.data() + (i * n_actions_ + a) * n_states_, n_states_};
    }

    bool operator==(const ScenarioParams&) const = default;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    numvec cost_;
    numvec trans_;
};

/// A single invariant violation found while checking model data.
struct Diagnostic {
    std::string where;
    std::string message;

    std::string str() const { return where.empty() ? message : where + ": " + message; }
};

namespace detail {

inline std::string fmt_double(double x) {
    std::ostringstream os;
    os.precision(12);
    os << x;
    return os.str();
}

inline void check_distribution(std::span<const double> p, const std::string& where,
                               bool strictly_positive, std::vector<Diagnostic>& out) {
    double sum = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (!std::isfinite(p[k])) {
            out.push_back({where, "entry " + std::to_string(k) + " is not finite"});
            return;
        }
        if (p[k] < 0.0 || (strictly_positive && p[k] <= 0.0)) {
            out.push_back({where, "entry " + std::to_string(k) + " = " + fmt_double(p[k]) +
                                      (strictly_positive ? " is not positive" : " is negative")});
        }
        sum += p[k];
    }
    if (std::abs(sum - 1.0) > kSumTolerance)
        out.push_back({where, "sums to " + fmt_double(sum) + ", expected 1"});
}

} // namespace detail

/// Checks every invariant of an uncertain MDP and returns all violations found.
inline std::vector<Diagnostic> check_model(double gamma, std::span<const double> q,
                                           std::span<const double> probs,
                                           std::span<const ScenarioParams> scenarios) {
    std::vector<Diagnostic> out;
    if (!(gamma >= 0.0 && gamma < 1.0))
        out.push_back({"gamma", "discount " + detail::fmt_double(gamma) + " outside [0,1)"});
    if (scenarios.empty()) {
        out.push_back({"scenarios", "at least one scenario is required"});
        return out;
    }
    const std::size_t n = scenarios.front().n_states();
    const std::size_t m = scenarios.front().n_actions();
    if (n == 0 || m == 0) out.push_back({"scenarios", "empty state or action space"});
    if (q.size() != n)
        out.push_back({"q", "length " + std::to_string(q.size()) + " != |H| = " + std::to_string(n)});
    else
        detail::check_distribution(q, "q", false, out);
    if (probs.size() != scenarios.size())
        out.push_back({"probs", "length " + std::to_string(probs.size()) +
                                    " != |S| = " + std::to_string(scenarios.size())});
    else
        detail::check_distribution(probs, "probs", true, out);

    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        const auto& sc = scenarios[s];
        if (sc.n_states() != n || sc.n_actions() != m) {
            out.push_back({"scenario " + std::to_string(s), "dimensions differ from scenario 0"});
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t a = 0; a < m; ++a) {
                const std::string where = "(s=" + std::to_string(s) + ", i=" + std::to_string(i) +
                                          ", a=" + std::to_string(a) + ")";
                const double c = sc.cost(i, a);
                if (!std::isfinite(c))
                    out.push_back({where, "cost is not finite"});
                else if (c < 0.0)
                    out.push_back({where, "cost " + detail::fmt_double(c) + " is negative"});
                detail::check_distribution(sc.row(i, a), where + " transition row", false, out);
            }
        }
    }
    return out;
}

/// MDP with a finite scenario distribution over its parameters. Immutable once built.
class UncertainMdp {
public:
    UncertainMdp() = default;

    /// Throws InvalidModel with the first violated invariant.
    UncertainMdp(double gamma, numvec q, std::vector<ScenarioParams> scenarios, numvec probs)
        : gamma_(gamma), q_(std::move(q)), probs_(std::move(probs)),
          scenarios_(std::move(scenarios)) {
        auto issues = check_model(gamma_, q_, probs_, scenarios_);
        if (!issues.empty()) throw InvalidModel(issues.front().str());
        n_states_ = scenarios_.front().n_states();
        n_actions_ = scenarios_.front().n_actions();
    }

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    std::size_t n_scenarios() const { return scenarios_.size(); }
    double gamma() const { return gamma_; }
    const numvec& q() const { return q_; }
    const numvec& probs() const { return probs_; }
    double prob(std::size_t s) const { return probs_[s]; }
    const ScenarioParams& scenario(std::size_t s) const { return scenarios_.at(s); }
    const std::vector<ScenarioParams>& scenarios() const { return scenarios_; }

    /// Copy of this model restricted to one scenario with probability one.
    UncertainMdp single_scenario(std::size_t s) const {
        return UncertainMdp(gamma_, q_, {scenarios_.at(s)}, {1.0});
    }

    bool operator==(const UncertainMdp&) const = default;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    double gamma_ = 0.0;
    numvec q_;
    numvec probs_;
    std::vector<ScenarioParams> scenarios_;
};

/// Stationary policy, either deterministic (state -> action) or randomized
/// (state -> distribution over actions).
class Policy {
public:
    Policy() = default;

    static Policy deterministic(indvec actions, std::size_t n_actions) {
        for (std::size_t i = 0; i < actions.size(); ++i)
            if (actions[i] >= n_actions)
                throw InvalidModel("policy: action " + std::to_string(actions[i]) + " in state " +
                                   std::to_string(i) + " out of range");
        Policy p;
        p.n_states_ = actions.size();
        p.n_actions_ = n_actions;
        p.actions_ = std::move(actions);
        return p;
    }

    /// `weights` is row-major (state, action); rows must be distributions.
    static Policy randomized(std::size_t n_states, std::size_t n_actions, numvec weights) {
        if (weights.size() != n_states * n_actions)
            throw InvalidModel("policy: weight matrix has wrong size");
        std::vector<Diagnostic> issues;
        for (std::size_t i = 0; i < n_states; ++i) {
            std::span<const double> row(weights.data() + i * n_actions, n_actions);
            detail::check_distribution(row, "policy state " + std::to_string(i), false, issues);
            for (double w : row)
                if (w > 1.0) issues.push_back({"policy state " + std::to_string(i), "weight above 1"});
        }
        if (!issues.empty()) throw InvalidModel(issues.front().str());
        Policy p;
        p.n_states_ = n_states;
        p.n_actions_ = n_actions;
        p.weights_ = std::move(weights);
        return p;
    }

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    bool is_deterministic() const { return !actions_.empty() || n_states_ == 0; }

    /// Action taken in state i; only valid for deterministic policies.
    std::size_t action(std::size_t i) const { return actions_.at(i); }
    const indvec& actions() const { return actions_; }

    double weight(std::size_t i, std::size_t a) const {
        if (is_deterministic()) return actions_[i] == a ? 1.0 : 0.0;
        return weights_[i * n_actions_ + a];
    }

    /// Unit-row randomized encoding of this policy.
    Policy to_randomized() const {
        numvec w(n_states_ * n_actions_, 0.0);
        for (std::size_t i = 0; i < n_states_; ++i)
            for (std::size_t a = 0; a < n_actions_; ++a) w[i * n_actions_ + a] = weight(i, a);
        return randomized(n_states_, n_actions_, std::move(w));
    }

    /// Nonincreasing action index along the state index.
    bool is_monotone() const {
        if (!is_deterministic()) return false;
        for (std::size_t i = 1; i < actions_.size(); ++i)
            if (actions_[i] > actions_[i - 1]) return false;
        return true;
    }

    bool operator==(const Policy&) const = default;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    indvec actions_;
    numvec weights_;
};

inline void check_policy_dims(const UncertainMdp& mdp, const Policy& pol) {
    if (pol.n_states() != mdp.n_states() || pol.n_actions() != mdp.n_actions())
        throw InvalidModel("policy dimensions (" + std::to_string(pol.n_states()) + "x" +
                           std::to_string(pol.n_actions()) + ") do not match model (" +
                           std::to_string(mdp.n_states()) + "x" +
                           std::to_string(mdp.n_actions()) + ")");
}

inline void check_scenario_index(const UncertainMdp& mdp, std::size_t s) {
    if (s >= mdp.n_scenarios())
        throw InvalidModel("scenario index " + std::to_string(s) + " out of range");
}

/// The two-scenario, single-state model where no deterministic policy is optimal.
/// Scenario 0 costs (0, 2) for actions (a, b); scenario 1 costs (2, 0).
inline UncertainMdp two_action_counterexample(double gamma = 0.99) {
    ScenarioParams s1(1, 2), s2(1, 2);
    s1.cost(0, 0) = 0.0;
    s1.cost(0, 1) = 2.0;
    s2.cost(0, 0) = 2.0;
    s2.cost(0, 1) = 0.0;
    for (auto* sc : {&s1, &s2}) {
        sc->trans(0, 0, 0) = 1.0;
        sc->trans(0, 1, 0) = 1.0;
    }
    return UncertainMdp(gamma, {1.0}, {s1, s2}, {0.5, 0.5});
}

} // namespace qmdp
