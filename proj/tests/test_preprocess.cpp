#include "oracles.hpp"

#include "qmdp/heuristics.hpp"
#include "qmdp/preprocess.hpp"
#include "qmdp/random.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace qmdp;

namespace {

UncertainMdp instance(std::uint64_t seed, std::size_t S = 8) {
    RandomInstanceSpec spec;
    spec.n_states = 3 + seed % 3;
    spec.n_actions = 2 + seed % 2;
    spec.n_scenarios = S;
    spec.gamma = 0.9;
    spec.seed = seed;
    return random_instance(spec);
}

} // namespace

TEST(Bounds, SandwichEveryPolicyAndTheOptimum) {
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        const auto mdp = instance(seed);
        for (double alpha : {0.5, 0.75, 1.0}) {
            const auto c = compute_bounds(mdp, alpha);
            for (const auto& act : oracle::all_policies(mdp.n_states(), mdp.n_actions())) {
                const auto costs = oracle::costs_of(mdp, act);
                for (std::size_t s = 0; s < mdp.n_scenarios(); ++s) {
                    EXPECT_LE(c.b_under[s], costs[s] + 1e-9);
                    EXPECT_GE(c.b_bar[s], costs[s] - 1e-9);
                }
            }
            const double opt = oracle::best_var(mdp, alpha).value;
            EXPECT_LE(c.b_l, opt + 1e-9);
            EXPECT_GE(c.b_u, opt - 1e-9);
        }
    }
}

TEST(Bounds, CoefficientsFollowTheirDefinitions) {
    const auto mdp = instance(3);
    const auto c = compute_bounds(mdp, 0.75);
    EXPECT_DOUBLE_EQ(c.big_m_global, c.b_u - c.b_l);
    for (std::size_t s = 0; s < mdp.n_scenarios(); ++s) {
        EXPECT_DOUBLE_EQ(c.big_m_scenario[s], std::max(0.0, c.b_bar[s] - c.b_l));
        for (std::size_t i = 0; i < mdp.n_states(); ++i) {
            EXPECT_GE(c.big_m(i, s), 0.0);
            EXPECT_DOUBLE_EQ(c.big_m(i, s), c.upper(i, s) - c.lower(i, s));
        }
    }
}

TEST(Bounds, ParallelMatchesSequential) {
    const auto mdp = instance(4);
    const auto a = compute_bounds(mdp, 0.75);
    const auto b = compute_bounds(mdp, 0.75, {kDefaultTol, true});
    EXPECT_EQ(a.b_bar, b.b_bar);
    EXPECT_EQ(a.b_under, b.b_under);
}

TEST(Bounds, WithAlphaEqualsRecomputation) {
    const auto mdp = instance(5);
    const auto base = compute_bounds(mdp, 0.5);
    for (double alpha : {0.25, 0.75, 1.0}) {
        const auto a = with_alpha(base, alpha);
        const auto b = compute_bounds(mdp, alpha);
        EXPECT_EQ(a.b_l, b.b_l);
        EXPECT_EQ(a.b_u, b.b_u);
        EXPECT_EQ(a.big_m_scenario, b.big_m_scenario);
    }
}

TEST(Bounds, TwoActionValues) {
    const auto mdp = two_action_counterexample(0.99);
    const auto c = compute_bounds(mdp, 0.9);
    EXPECT_NEAR(c.b_l, 0.0, 1e-9);
    EXPECT_NEAR(c.b_u, 200.0, 1e-6);
    EXPECT_NEAR(c.big_m_global, 200.0, 1e-6);
}

TEST(FixScenarios, NeverExcludesAnOptimalCover) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto mdp = instance(seed);
        for (double alpha : {0.5, 0.75, 0.875}) {
            const auto best = oracle::best_var(mdp, alpha);
            const auto fixed = fix_scenarios(compute_bounds(mdp, alpha), best.value);
            const auto costs = oracle::costs_of(mdp, best.policy);
            for (std::size_t s = 0; s < mdp.n_scenarios(); ++s) {
                if (fixed.z_fixed[s] == ScenarioFix::forced0) EXPECT_GT(costs[s], best.value - 1e-9);
                if (fixed.z_fixed[s] == ScenarioFix::forced1) EXPECT_LE(costs[s], best.value + 1e-9);
            }
            EXPECT_LE(fixed.forced_mass(ScenarioFix::forced0), 1.0 - alpha + 1e-12);
        }
    }
}

TEST(FixScenarios, ForcesOutScenariosAboveTheUpperBound) {
    // the last scenario is expensive under every policy
    ScenarioParams cheap(1, 2), pricey(1, 2);
    for (auto* sc : {&cheap, &pricey})
        for (std::size_t a = 0; a < 2; ++a) sc->trans(0, a, 0) = 1.0;
    cheap.cost(0, 0) = 1.0;
    cheap.cost(0, 1) = 2.0;
    pricey.cost(0, 0) = 50.0;
    pricey.cost(0, 1) = 60.0;
    const UncertainMdp mdp(0.5, {1.0}, {cheap, cheap, cheap, pricey}, {0.25, 0.25, 0.25, 0.25});
    const auto f = fix_scenarios(compute_bounds(mdp, 0.75));
    EXPECT_EQ(f.z_fixed[3], ScenarioFix::forced0);
    EXPECT_EQ(f.z_fixed[0], ScenarioFix::free);
    std::ostringstream os;
    write_bounds_csv(os, f);
    const auto text = os.str();
    EXPECT_EQ(text.rfind("scenario,b_under,b_bar,status\n", 0), 0u);
    const auto last = text.substr(text.rfind("\n3,") + 1);
    EXPECT_EQ(last.substr(last.size() - 8), "forced0\n") << text;
}

TEST(FixScenarios, RejectsInconsistentBounds) {
    auto c = compute_bounds(instance(2, 4), 0.5);
    c.b_under[0] = c.b_u + 1.0;
    c.b_bar[0] = c.b_l - 1.0;
    EXPECT_THROW(fix_scenarios(c), Error);
    auto d = compute_bounds(instance(2, 4), 0.5);
    for (auto& b : d.b_under) b = d.b_u + 1.0; // everything forced out
    EXPECT_THROW(fix_scenarios(d), Error);
}

TEST(Selection, IsAMinimalCoverOfTheCheapestScenarios) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng() % 10;
        numvec b(n), p(n);
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            b[k] = std::floor(u(rng) * 5);
            sum += (p[k] = 0.1 + u(rng));
        }
        for (auto& x : p) x /= sum;
        const double alpha = 0.05 + 0.95 * u(rng);
        const auto sel = select_scenarios(b, p, alpha);
        EXPECT_GE(sel.selected_prob, alpha - 1e-12);
        const double var = oracle::var(b, p, alpha);
        for (std::size_t s = 0; s < n; ++s) {
            if (sel.z[s]) {
                EXPECT_LE(b[s], var);
                EXPECT_LT(sel.selected_prob - p[s], alpha - 1e-12) << "scenario " << s << " is removable";
            }
        }
    }
}

TEST(RobustVI, StopsBelowThresholdAndSolvesSingleScenario) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto mdp = instance(seed, 4);
        std::vector<bool> one(4, false);
        one[seed % 4] = true;
        const auto r = robust_policy_selection(mdp, one, 1e-8);
        EXPECT_LT(r.last_step, r.threshold);
        EXPECT_DOUBLE_EQ(r.threshold, 1e-8 * (1 - mdp.gamma()) / mdp.gamma());
        EXPECT_TRUE(r.policy.is_deterministic());
        // with a single scenario the robust problem is the ordinary one
        EXPECT_NEAR(oracle::policy_cost(mdp, seed % 4, r.policy.actions()),
                    optimal_value(mdp, seed % 4, Sense::min, 1e-10).value, 1e-6);
    }
}

TEST(RobustVI, TwoActionPicksTheSmallestWorstCase) {
    const auto mdp = two_action_counterexample(0.99);
    const auto r = robust_policy_selection(mdp, {true, true});
    EXPECT_NEAR(r.values[0], 200.0, 1e-4);
    EXPECT_EQ(r.policy.action(0), 0u);
    EXPECT_THROW(robust_policy_selection(mdp, {false, false}), Error);
}

TEST(MeanValue, SingleScenarioGivesTheOptimalPolicy) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto mdp = instance(seed, 1);
        const auto pol = mean_value_policy(mdp);
        EXPECT_NEAR(oracle::policy_cost(mdp, 0, pol.actions()), optimal_value(mdp, 0, Sense::min, 1e-10).value, 1e-6);
    }
}

TEST(MeanValue, UsesProbabilityWeightedParameters) {
    // scenario 1 is three times as likely, so action 1 is cheaper on average
    ScenarioParams a(1, 2), b(1, 2);
    for (auto* sc : {&a, &b})
        for (std::size_t k = 0; k < 2; ++k) sc->trans(0, k, 0) = 1.0;
    a.cost(0, 0) = 0.0;
    a.cost(0, 1) = 4.0;
    b.cost(0, 0) = 4.0;
    b.cost(0, 1) = 1.0;
    const UncertainMdp mdp(0.5, {1.0}, {a, b}, {0.25, 0.75});
    EXPECT_EQ(mean_value_policy(mdp).action(0), 1u);
}

TEST(InitialSolution, FeasibleAndBetweenOptimumAndUpperBound) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto mdp = instance(seed);
        for (double alpha : {0.75, 1.0}) {
            const auto c = compute_bounds(mdp, alpha);
            const auto h = initial_solution(mdp, c, alpha);
            const double opt = oracle::best_var(mdp, alpha).value;
            EXPECT_TRUE(h.policy.is_deterministic());
            EXPECT_GE(h.value, opt - 1e-9);
            EXPECT_LE(h.value, c.b_u + 1e-9);
            const auto ls = initial_solution(mdp, c, alpha, {kDefaultRobustEps, true, 20});
            EXPECT_LE(ls.value, h.value + 1e-12);
            EXPECT_GE(ls.value, opt - 1e-9);
        }
    }
}
