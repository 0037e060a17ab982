#include "oracles.hpp"

#include "qmdp/evaluation.hpp"
#include "qmdp/random.hpp"

#include <gtest/gtest.h>

using namespace qmdp;

namespace {

UncertainMdp small(std::uint64_t seed, std::size_t n = 4, std::size_t m = 3, std::size_t S = 3, double gamma = 0.9) {
    RandomInstanceSpec spec;
    spec.n_states = n;
    spec.n_actions = m;
    spec.n_scenarios = S;
    spec.gamma = gamma;
    spec.seed = seed;
    return random_instance(spec);
}

bool mentions(const std::vector<Diagnostic>& ds, const std::string& needle) {
    for (const auto& d : ds)
        if (d.str().find(needle) != std::string::npos) return true;
    return false;
}

} // namespace

TEST(Model, RejectsBadDiscount) {
    ScenarioParams sc(1, 1);
    sc.trans(0, 0, 0) = 1.0;
    EXPECT_THROW(UncertainMdp(1.0, {1.0}, {sc}, {1.0}), InvalidModel);
    EXPECT_THROW(UncertainMdp(-0.1, {1.0}, {sc}, {1.0}), InvalidModel);
    EXPECT_NO_THROW(UncertainMdp(0.0, {1.0}, {sc}, {1.0}));
}

TEST(Model, DiagnosticsNameScenarioStateAction) {
    ScenarioParams a(2, 2), b(2, 2);
    for (auto* sc : {&a, &b})
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t k = 0; k < 2; ++k) sc->trans(i, k, i) = 1.0;
    b.trans(1, 0, 1) = 0.98;
    b.cost(0, 1) = -1.0;
    const auto ds = check_model(0.9, numvec{0.5, 0.5}, numvec{0.5, 0.5}, std::vector{a, b});
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_TRUE(mentions(ds, "(s=1, i=1, a=0)"));
    EXPECT_TRUE(mentions(ds, "(s=1, i=0, a=1)"));
    EXPECT_TRUE(mentions(ds, "negative"));
}

TEST(Model, ProbabilitiesMustBePositiveAndSumToOne) {
    ScenarioParams sc(1, 1);
    sc.trans(0, 0, 0) = 1.0;
    EXPECT_THROW(UncertainMdp(0.5, {1.0}, {sc, sc}, {1.0, 0.0}), InvalidModel);
    EXPECT_THROW(UncertainMdp(0.5, {1.0}, {sc, sc}, {0.6, 0.6}), InvalidModel);
    EXPECT_THROW(UncertainMdp(0.5, {0.5}, {sc}, {1.0}), InvalidModel);
    EXPECT_NO_THROW(UncertainMdp(0.5, {1.0}, {sc, sc}, {0.5, 0.5 + 5e-10}));
}

TEST(Policy, RandomizedRowsAreValidated) {
    EXPECT_THROW(Policy::randomized(1, 2, {0.7, 0.7}), InvalidModel);
    EXPECT_THROW(Policy::randomized(1, 2, {1.5, -0.5}), InvalidModel);
    EXPECT_THROW(Policy::deterministic({2}, 2), InvalidModel);
    const auto p = Policy::randomized(1, 2, {0.5, 0.5});
    EXPECT_FALSE(p.is_deterministic());
    EXPECT_FALSE(p.is_monotone());
}

TEST(Policy, MonotoneMeansNonincreasingActions) {
    EXPECT_TRUE(Policy::deterministic({2, 2, 1, 0}, 3).is_monotone());
    EXPECT_FALSE(Policy::deterministic({0, 1}, 3).is_monotone());
    EXPECT_TRUE(Policy::deterministic({}, 3).is_monotone());
}

TEST(Evaluation, MatchesGaussianEliminationOnRandomInstances) {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto mdp = small(seed, 2 + seed % 5, 2 + seed % 3, 2, seed % 2 ? 0.95 : 0.5);
        std::mt19937_64 rng(seed);
        indvec act(mdp.n_states());
        for (auto& a : act) a = rng() % mdp.n_actions();
        const auto pol = Policy::deterministic(act, mdp.n_actions());
        for (std::size_t s = 0; s < mdp.n_scenarios(); ++s) {
            const auto want = oracle::policy_values(mdp, s, oracle::unit_weights(act, mdp.n_actions()));
            for (auto method : {EvalMethod::direct, EvalMethod::iterative}) {
                const auto got = evaluate_policy(mdp, s, pol, {1e-10, method});
                for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-7 * (1 + std::abs(want[i])));
            }
        }
    }
}

TEST(Evaluation, RandomizedPolicyMatchesOracle) {
    const auto mdp = small(5);
    numvec w(mdp.n_states() * mdp.n_actions());
    std::vector<numvec> wo(mdp.n_states(), numvec(mdp.n_actions()));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < mdp.n_states(); ++i) {
        double sum = 0.0;
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) sum += (wo[i][a] = u(rng));
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) w[i * mdp.n_actions() + a] = (wo[i][a] /= sum);
    }
    const auto pol = Policy::randomized(mdp.n_states(), mdp.n_actions(), w);
    const auto got = evaluate_policy(mdp, 1, pol);
    const auto want = oracle::policy_values(mdp, 1, wo);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-9);
}

TEST(Evaluation, DeterministicAndUnitRowEncodingsAgreeExactly) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto mdp = small(seed);
        indvec act(mdp.n_states());
        for (std::size_t i = 0; i < act.size(); ++i) act[i] = (seed + i) % mdp.n_actions();
        const auto det = Policy::deterministic(act, mdp.n_actions());
        const auto rnd = det.to_randomized();
        for (std::size_t s = 0; s < mdp.n_scenarios(); ++s) EXPECT_EQ(evaluate_policy(mdp, s, det), evaluate_policy(mdp, s, rnd));
    }
}

TEST(Evaluation, BellmanResidualWithinTolerance) {
    for (double gamma : {0.0, 0.5, 0.99}) {
        const auto mdp = small(11, 6, 3, 2, gamma);
        const auto pol = Policy::deterministic(indvec(6, 1), 3);
        for (double tol : {1e-6, 1e-9}) {
            for (auto method : {EvalMethod::direct, EvalMethod::iterative}) {
                const auto v = evaluate_policy(mdp, 0, pol, {tol, method});
                EXPECT_LE(bellman_residual(mdp, 0, pol, v), tol);
            }
        }
    }
}

TEST(Evaluation, ZeroDiscountGivesImmediateCost) {
    const auto mdp = small(2, 3, 2, 1, 0.0);
    const auto pol = Policy::deterministic({1, 0, 1}, 2);
    const auto v = evaluate_policy(mdp, 0, pol);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(v[i], mdp.scenario(0).cost(i, pol.action(i)));
}

TEST(Evaluation, RejectsMismatchedPolicy) {
    const auto mdp = small(1);
    EXPECT_THROW(evaluate_policy(mdp, 0, Policy::deterministic({0}, 3)), InvalidModel);
    EXPECT_THROW(evaluate_policy(mdp, 7, Policy::deterministic(indvec(4, 0), 3)), InvalidModel);
}

TEST(OptimalValue, MinAndMaxMatchPolicyEnumeration) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto mdp = small(seed, 3 + seed % 2, 2 + seed % 2, 2, 0.9);
        for (std::size_t s = 0; s < mdp.n_scenarios(); ++s) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (const auto& act : oracle::all_policies(mdp.n_states(), mdp.n_actions())) {
                const double c = oracle::policy_cost(mdp, s, act);
                lo = std::min(lo, c);
                hi = std::max(hi, c);
            }
            const auto mn = optimal_value(mdp, s, Sense::min, 1e-10);
            const auto mx = optimal_value(mdp, s, Sense::max, 1e-10);
            EXPECT_NEAR(mn.value, lo, 1e-8);
            EXPECT_NEAR(mx.value, hi, 1e-8);
            // the approximations stay on the conservative side
            EXPECT_LE(mn.value, lo + 1e-12);
            EXPECT_GE(mx.value, hi - 1e-12);
            EXPECT_NEAR(oracle::policy_cost(mdp, s, mn.policy.actions()), lo, 1e-7);
            EXPECT_NEAR(oracle::policy_cost(mdp, s, mx.policy.actions()), hi, 1e-7);
        }
    }
}

TEST(OptimalValue, GreedyTiesGoToSmallestAction) {
    ScenarioParams sc(1, 3);
    for (std::size_t a = 0; a < 3; ++a) {
        sc.cost(0, a) = 1.0;
        sc.trans(0, a, 0) = 1.0;
    }
    const UncertainMdp mdp(0.5, {1.0}, {sc}, {1.0});
    EXPECT_EQ(optimal_value(mdp, 0, Sense::min).policy.action(0), 0u);
    EXPECT_EQ(optimal_value(mdp, 0, Sense::max).policy.action(0), 0u);
}

TEST(RestrictedMin, MatchesEnumerationOverAllowedActions) {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        const auto mdp = small(seed, 4, 3, 2, 0.95);
        std::mt19937_64 rng(seed * 7);
        std::vector<ActionRange> ranges(mdp.n_states());
        for (auto& r : ranges) {
            std::size_t a = rng() % 3, b = rng() % 3;
            r = {std::min(a, b), std::max(a, b)};
        }
        for (std::size_t s = 0; s < mdp.n_scenarios(); ++s) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& act : oracle::all_policies(4, 3)) {
                bool ok = true;
                for (std::size_t i = 0; i < 4; ++i) ok = ok && ranges[i].contains(act[i]);
                if (ok) best = std::min(best, oracle::policy_cost(mdp, s, act));
            }
            const auto sol = restricted_min_value(mdp, s, ranges);
            EXPECT_NEAR(sol.value, best, 1e-9 * (1 + best));
            for (std::size_t i = 0; i < 4; ++i) EXPECT_TRUE(ranges[i].contains(sol.actions[i]));
            const indvec start(4, 2);
            EXPECT_NEAR(restricted_min_value(mdp, s, ranges, &start).value, best, 1e-9 * (1 + best));
        }
    }
}
