#include "oracles.hpp"

#include "qmdp/exact_solver.hpp"
#include "qmdp/milp_export.hpp"
#include "qmdp/random.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace qmdp;

namespace {

UncertainMdp instance(std::uint64_t seed, std::size_t n = 3, std::size_t m = 2, std::size_t S = 4) {
    RandomInstanceSpec spec;
    spec.n_states = n;
    spec.n_actions = m;
    spec.n_scenarios = S;
    spec.gamma = 0.9;
    spec.seed = seed;
    return random_instance(spec);
}

const std::vector<ModelKind> kAllKinds{ModelKind::QMDP_D_bigM, ModelKind::QMDP_D_McCormick,
                                       ModelKind::QMDP_R_McCormick_relax, ModelKind::QMDP_M_bigM};

std::string export_text(const UncertainMdp& mdp, double alpha, ModelVariant v, const BoundsCache* c,
                        ModelCounts* counts = nullptr) {
    std::ostringstream os;
    const auto cnt = export_model(os, mdp, alpha, v, c);
    if (counts) *counts = cnt;
    return os.str();
}

// Assignment of every model variable induced by a deterministic policy.
std::map<std::string, double> assignment(const UncertainMdp& mdp, const indvec& act, double alpha) {
    std::map<std::string, double> x;
    const std::size_t n = mdp.n_states(), m = mdp.n_actions(), S = mdp.n_scenarios();
    const auto pol = Policy::deterministic(act, m);
    const auto pv = var_of_policy(mdp, pol, alpha);
    x["y"] = pv.value;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < m; ++a) x[detail::w_name(i, a)] = act[i] == a ? 1.0 : 0.0;
    for (std::size_t s = 0; s < S; ++s) x[detail::z_name(s)] = 0.0;
    for (std::size_t s : pv.satisfied) x[detail::z_name(s)] = 1.0;
    for (std::size_t s = 0; s < S; ++s) {
        const auto v = oracle::policy_values(mdp, s, oracle::unit_weights(act, m));
        for (std::size_t i = 0; i < n; ++i) x[detail::v_name(i, s)] = v[i];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t a = 0; a < m; ++a) x[detail::x_name(i, j, a, s)] = act[i] == a ? v[j] : 0.0;
    }
    return x;
}

} // namespace

TEST(Export, EveryVariantParsesAndIsDeterministic) {
    const auto mdp = instance(1);
    const auto cache = fix_scenarios(compute_bounds(mdp, 0.75));
    for (auto k : kAllKinds)
        for (bool tight : {true, false}) {
            const ModelVariant v{k, tight};
            const auto text = export_text(mdp, 0.75, v, &cache);
            EXPECT_EQ(text, export_text(mdp, 0.75, v, &cache)) << v.name();
            oracle::LpModel lp;
            ASSERT_NO_THROW(lp = oracle::parse_lp(text)) << v.name();
            EXPECT_EQ(lp.objective_var, "y");
        }
}

TEST(Export, RowAndVariableCounts) {
    const std::size_t n = 4, m = 3, S = 5;
    const auto mdp = instance(2, n, m, S);
    const auto cache = compute_bounds(mdp, 0.8);
    for (auto k : kAllKinds)
        for (bool tight : {true, false}) {
            const ModelVariant v{k, tight};
            ModelCounts cnt;
            const auto lp = oracle::parse_lp(export_text(mdp, 0.8, v, &cache, &cnt));
            std::size_t rows = n + 1 + S;
            rows += v.mccormick() ? S * n + 4 * S * n * n * m : S * n * m;
            if (tight) rows += S;
            if (v.monotone()) rows += n * (n - 1) / 2 * m;
            EXPECT_EQ(cnt.rows, rows) << v.name();
            EXPECT_EQ(lp.rows.size(), rows) << v.name();
            EXPECT_EQ(cnt.variables, lp.variables().size()) << v.name();
            EXPECT_EQ(cnt.x_variables, v.mccormick() ? S * n * n * m : 0u);
            EXPECT_EQ(cnt.binaries, lp.binaries.size());
            EXPECT_EQ(lp.binaries.size(), (v.binary_policy() ? n * m : 0u) + S);
        }
}

TEST(Export, BasicModeUsesTheLargeConstant) {
    const auto mdp = instance(3);
    ModelCounts cnt;
    const auto text = export_text(mdp, 0.5, {ModelKind::QMDP_D_bigM, false}, nullptr, &cnt);
    EXPECT_EQ(cnt.max_quantile_m, kBasicBigM);
    EXPECT_EQ(cnt.cut_rows, 0u);
    const auto lp = oracle::parse_lp(text);
    EXPECT_EQ(lp.bounds_of("y").first, 0.0);
    EXPECT_TRUE(std::isinf(lp.bounds_of("y").second));
    for (const auto& r : lp.rows)
        if (r.name.rfind("quant_", 0) == 0) EXPECT_EQ(r.rhs, kBasicBigM);
}

TEST(Export, CachedModeUsesTightCoefficientsAndBounds) {
    const auto mdp = instance(4);
    const auto cache = compute_bounds(mdp, 0.75);
    ModelCounts cnt;
    const auto lp = oracle::parse_lp(export_text(mdp, 0.75, {ModelKind::QMDP_D_bigM, true}, &cache, &cnt));
    EXPECT_DOUBLE_EQ(lp.bounds_of("y").first, cache.b_l);
    EXPECT_DOUBLE_EQ(lp.bounds_of("y").second, cache.b_u);
    double ms = 0.0;
    for (std::size_t s = 0; s < mdp.n_scenarios(); ++s) ms = std::max(ms, cache.big_m_scenario[s]);
    EXPECT_DOUBLE_EQ(cnt.max_quantile_m, ms);
    EXPECT_EQ(cnt.cut_rows, mdp.n_scenarios());
    for (std::size_t s = 0; s < mdp.n_scenarios(); ++s)
        for (std::size_t i = 0; i < mdp.n_states(); ++i) {
            const auto b = lp.bounds_of(detail::v_name(i, s));
            EXPECT_DOUBLE_EQ(b.first, cache.lower(i, s));
            EXPECT_DOUBLE_EQ(b.second, cache.upper(i, s));
        }
}

TEST(Export, ForcedScenariosAreFixedInBounds) {
    ScenarioParams cheap(1, 2), pricey(1, 2);
    for (auto* sc : {&cheap, &pricey})
        for (std::size_t a = 0; a < 2; ++a) sc->trans(0, a, 0) = 1.0;
    cheap.cost(0, 1) = 1.0;
    pricey.cost(0, 0) = 50.0;
    pricey.cost(0, 1) = 60.0;
    const UncertainMdp mdp(0.5, {1.0}, {cheap, cheap, cheap, pricey}, {0.25, 0.25, 0.25, 0.25});
    const auto cache = fix_scenarios(compute_bounds(mdp, 0.75));
    ASSERT_EQ(cache.z_fixed[3], ScenarioFix::forced0);
    const auto text = export_text(mdp, 0.75, {ModelKind::QMDP_D_bigM, true}, &cache);
    EXPECT_NE(text.find(" 0 <= z_3 <= 0\n"), std::string::npos);
    const auto lp = oracle::parse_lp(text);
    EXPECT_EQ(lp.bounds_of("z_3"), std::make_pair(0.0, 0.0));
    EXPECT_EQ(lp.bounds_of("z_0"), std::make_pair(0.0, 1.0));
}

TEST(Export, OptimalPolicyIsFeasibleInEveryVariant) {
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        const auto mdp = instance(seed, 3, 2 + seed % 2, 4);
        for (double alpha : {0.5, 0.75, 1.0}) {
            for (auto k : kAllKinds) {
                const ModelVariant v{k, seed % 3 != 0};
                const auto best = oracle::best_var(mdp, alpha, v.monotone());
                const auto cache = fix_scenarios(compute_bounds(mdp, alpha), best.value);
                const auto lp = oracle::parse_lp(export_text(mdp, alpha, v, &cache));
                std::string worst;
                const double viol = oracle::max_violation(lp, assignment(mdp, best.policy, alpha), &worst);
                EXPECT_LE(viol, 1e-7) << v.name() << " seed " << seed << " alpha " << alpha << " at " << worst;
            }
        }
    }
}

TEST(Export, NonMonotonePolicyViolatesMonotoneRows) {
    const auto mdp = instance(7, 3, 3, 2);
    const auto cache = compute_bounds(mdp, 1.0);
    const auto lp = oracle::parse_lp(export_text(mdp, 1.0, {ModelKind::QMDP_M_bigM, true}, &cache));
    // cached bounds on y could also cut this policy; check the mono rows alone
    const auto x = assignment(mdp, {0, 2, 1}, 1.0);
    double worst = 0.0;
    for (const auto& r : lp.rows) {
        if (r.name.rfind("mono_", 0) != 0) continue;
        double lhs = 0.0;
        for (const auto& [var, c] : r.terms) lhs += c * x.at(var);
        worst = std::max(worst, lhs - r.rhs);
    }
    EXPECT_GE(worst, 1.0 - 1e-12);
}

TEST(Export, PerScenarioBigMKeepsTheOptimumFeasible) {
    // One state, zero discount. Scenario 0 costs (0, 5), scenario 1 costs (10, 3).
    // Action 0 covering only scenario 0 gives VaR 0, but scenario 1 then costs 10,
    // above b_u = 5, so the single M = b_u - b_l = 5 would cut the optimum off.
    ScenarioParams s0(1, 2), s1(1, 2);
    for (auto* sc : {&s0, &s1})
        for (std::size_t a = 0; a < 2; ++a) sc->trans(0, a, 0) = 1.0;
    s0.cost(0, 1) = 5.0;
    s1.cost(0, 0) = 10.0;
    s1.cost(0, 1) = 3.0;
    const UncertainMdp mdp(0.0, {1.0}, {s0, s1}, {0.5, 0.5});
    const auto cache = compute_bounds(mdp, 0.5);
    ASSERT_DOUBLE_EQ(cache.b_u, 5.0);
    ASSERT_DOUBLE_EQ(cache.b_l, 0.0);
    ASSERT_DOUBLE_EQ(cache.big_m_global, 5.0);
    EXPECT_EQ(brute_force(mdp, 0.5).value, 0.0);

    const auto x = assignment(mdp, {0}, 0.5);
    ASSERT_EQ(x.at("y"), 0.0);
    ASSERT_EQ(x.at("z_1"), 0.0);
    // the uncovered scenario exceeds y by more than the global M
    EXPECT_GT(x.at("v_0_1") - x.at("y"), cache.big_m_global);

    const auto lp = oracle::parse_lp(export_text(mdp, 0.5, {ModelKind::QMDP_D_bigM, true}, &cache));
    EXPECT_LE(oracle::max_violation(lp, x), 1e-12);
}

TEST(Export, RelaxedPolicyVariablesAreContinuous) {
    const auto mdp = instance(5);
    const auto cache = compute_bounds(mdp, 0.75);
    const auto lp = oracle::parse_lp(export_text(mdp, 0.75, {ModelKind::QMDP_R_McCormick_relax, true}, &cache));
    for (std::size_t i = 0; i < mdp.n_states(); ++i)
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            EXPECT_EQ(lp.binaries.count(detail::w_name(i, a)), 0u);
            EXPECT_EQ(lp.bounds_of(detail::w_name(i, a)), std::make_pair(0.0, 1.0));
        }
}

TEST(Export, LongRowsWrap) {
    RandomInstanceSpec spec;
    spec.n_states = 2;
    spec.n_actions = 2;
    spec.n_scenarios = 60;
    spec.equiprobable = false;
    const auto mdp = random_instance(spec);
    const auto text = export_text(mdp, 0.9, {ModelKind::QMDP_D_bigM, false}, nullptr);
    std::istringstream in(text);
    std::string line;
    bool continuation = false;
    while (std::getline(in, line)) {
        EXPECT_LT(line.size(), 255u);
        continuation = continuation || line.rfind("  ", 0) == 0;
    }
    EXPECT_TRUE(continuation);
    EXPECT_EQ(oracle::parse_lp(text).rows.front().name, "assign_0");
}

TEST(Export, TwoActionQuantileCoefficient) {
    const auto mdp = two_action_counterexample(0.99);
    const auto cache = compute_bounds(mdp, 0.9);
    ModelCounts cnt;
    export_text(mdp, 0.9, {ModelKind::QMDP_D_bigM, true}, &cache, &cnt);
    EXPECT_NEAR(cnt.max_quantile_m, 200.0, 1e-9);
    EXPECT_NEAR(cache.big_m_global, 200.0, 1e-9);
}

TEST(Export, FileNamesAndErrors) {
    EXPECT_EQ(model_file_name("inv", {ModelKind::QMDP_D_bigM, true}, 0.9), "inv_QMDP_D_bigM_0.9.lp");
    EXPECT_EQ(model_file_name("inv", {ModelKind::QMDP_R_McCormick_relax, false}, 1.0),
              "inv_QMDP_R_McCormick_relax_basic_1.lp");
    EXPECT_EQ(parse_model_kind("QMDP_M_bigM"), ModelKind::QMDP_M_bigM);
    EXPECT_FALSE(parse_model_kind("QMDP_X").has_value());

    const auto mdp = instance(6);
    std::ostringstream os;
    EXPECT_THROW(export_model(os, mdp, 0.5, {ModelKind::QMDP_D_bigM, true}, nullptr), Error);
    const auto cache = compute_bounds(mdp, 0.75);
    EXPECT_THROW(export_model(os, mdp, 0.5, {ModelKind::QMDP_D_bigM, true}, &cache), Error);

    const auto dir = std::filesystem::temp_directory_path() / "qmdp_export_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / model_file_name("t", {ModelKind::QMDP_D_bigM, true}, 0.75);
    export_model(path, mdp, 0.75, {ModelKind::QMDP_D_bigM, true}, &cache);
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    EXPECT_EQ(buf.str(), export_text(mdp, 0.75, {ModelKind::QMDP_D_bigM, true}, &cache));
    std::filesystem::remove_all(dir);
    EXPECT_THROW(export_model(dir / "missing" / "x.lp", mdp, 0.75, {ModelKind::QMDP_D_bigM, true}, &cache), Error);
}
