#pragma once

// Perishable-inventory instances: Poisson demand and supply, batch-wide
// expiration, disposal, shortage, holding and procurement costs.
//
// Inventory levels, rates and procurement quantities are all measured in
// batches of `batch_size` units.

#include "qmdp/mdp.hpp"

#include <cmath>
#include <random>
#include <string>

namespace qmdp {

struct InventoryConfig {
    std::size_t capacity_units = 50;   ///< K, in units
    std::size_t batch_size = 10;
    std::size_t n_vehicles = 4;        ///< V, actions are 0..V vehicles
    std::size_t packs_per_vehicle = 20;
    double unit_holding = 10.0;        ///< per batch held
    double unit_disposal = 200.0;      ///< per batch disposed
    double unit_shortage = 1000.0;     ///< per batch short
    numvec action_costs;               ///< per action; empty means vehicle_cost * a
    double vehicle_cost = 300.0;
    double cost_scale = 1e-3;
    double gamma = 0.99;
    double alpha = 0.9;
    double tail_eps = 1e-4;
    double demand_lo = 30.0, demand_hi = 130.0; ///< units per period
    double supply_lo = 20.0, supply_hi = 80.0;  ///< units per period
    int shelf_life_lo = 1, shelf_life_hi = 6;
    std::size_t n_scenarios = 5;
    std::uint64_t rng_seed = 1;

    std::size_t n_states() const { return capacity_units / batch_size + 1; }
    std::size_t n_actions() const { return n_vehicles + 1; }
    std::size_t max_level() const { return capacity_units / batch_size; }
    /// Batches added by action a.
    std::size_t added(std::size_t a) const { return a * packs_per_vehicle / batch_size; }

    double action_cost(std::size_t a) const {
        return action_costs.empty() ? vehicle_cost * static_cast<double>(a) : action_costs.at(a);
    }

    void validate() const {
        if (batch_size == 0 || capacity_units == 0 || capacity_units % batch_size != 0)
            throw InvalidModel("inventory: capacity must be a positive multiple of batch_size");
        if (packs_per_vehicle % batch_size != 0)
            throw InvalidModel("inventory: packs_per_vehicle must be a multiple of batch_size");
        if (!(tail_eps > 0.0 && tail_eps <= 0.1)) throw InvalidModel("inventory: tail_eps outside (0, 0.1]");
        if (unit_holding < 0 || unit_disposal < 0 || unit_shortage < 0 || vehicle_cost < 0 || cost_scale < 0)
            throw InvalidModel("inventory: cost rates must be nonnegative");
        if (!action_costs.empty() && action_costs.size() != n_actions())
            throw InvalidModel("inventory: action_costs needs one entry per action (V + 1)");
        for (double c : action_costs)
            if (!(c >= 0.0)) throw InvalidModel("inventory: action costs must be nonnegative");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidModel("inventory: gamma outside [0, 1)");
        if (!(demand_lo > 0 && demand_lo <= demand_hi && supply_lo > 0 && supply_lo <= supply_hi))
            throw InvalidModel("inventory: invalid rate ranges");
        if (shelf_life_lo < 1 || shelf_life_lo > shelf_life_hi)
            throw InvalidModel("inventory: invalid shelf-life range");
        if (n_scenarios == 0) throw InvalidModel("inventory: n_scenarios must be positive");
    }
};

namespace detail {

inline double poisson_pmf(double mu, long k) {
    if (k < 0) return 0.0;
    if (mu == 0.0) return k == 0 ? 1.0 : 0.0;
    const double kd = static_cast<double>(k);
    return std::exp(kd * std::log(mu) - mu - std::lgamma(kd + 1.0));
}

/// Smallest n with P(Poisson(mu) > n) <= tail.
inline long poisson_truncation(double mu, double tail) {
    double cdf = 0.0;
    for (long n = 0;; ++n) {
        cdf += poisson_pmf(mu, n);
        if (1.0 - cdf <= tail) return n;
        if (n > 100000) throw Error("poisson_truncation: no convergence");
    }
}

} // namespace detail

/// P(Poisson(mu) <= k).
inline double poisson_cdf(double mu, long k) {
    double s = 0.0;
    for (long n = 0; n <= k; ++n) s += detail::poisson_pmf(mu, n);
    return std::min(1.0, s);
}

struct InventoryScenario {
    double mu_d = 1.0;  ///< demand rate, batches per period
    double mu_u = 1.0;  ///< supply rate, batches per period
    int t_e = 1;        ///< shelf life, periods
    long delta_min = 0; ///< minus the largest demand kept
    long delta_max = 0; ///< largest supply kept

    /// Probability of a supply-minus-demand change delta over the truncated support,
    /// normalized so the kept (D, U) pairs carry total mass 1.
    double change_prob(long delta) const {
        double g = 0.0;
        for (long d = 0; d <= -delta_min; ++d) {
            const long u = d + delta;
            if (u < 0 || u > delta_max) continue;
            g += detail::poisson_pmf(mu_d, d) * detail::poisson_pmf(mu_u, u);
        }
        return g / kept_mass();
    }

    /// Probability mass of the truncated (D, U) support before normalization.
    double kept_mass() const { return poisson_cdf(mu_d, -delta_min) * poisson_cdf(mu_u, delta_max); }
};

inline InventoryScenario make_scenario(double mu_d, double mu_u, int t_e, double tail_eps) {
    if (!(mu_d > 0.0 && mu_u > 0.0)) throw InvalidModel("inventory: rates must be positive");
    if (t_e < 0) throw InvalidModel("inventory: shelf life must be nonnegative");
    InventoryScenario s;
    s.mu_d = mu_d;
    s.mu_u = mu_u;
    s.t_e = t_e;
    s.delta_min = -detail::poisson_truncation(mu_d, tail_eps / 2.0);
    s.delta_max = detail::poisson_truncation(mu_u, tail_eps / 2.0);
    if (s.delta_min == 0 && s.delta_max == 0)
        throw InvalidModel("inventory: truncation leaves no demand or supply variation; lower tail_eps");
    return s;
}

/// f_e(t_e, k): probability that fewer than k batches are demanded within t_e periods,
/// i.e. that a stock of k batches is not used up before it expires.
inline double erlang_expire(const InventoryScenario& scn, long k) {
    if (k <= 0) return 0.0;
    return poisson_cdf(scn.mu_d * scn.t_e, k - 1);
}

/// Row of the action-free kernel for a pre-transition level m (m may exceed the
/// capacity after procurement). Entries j = 0 and j = K absorb the tails.
inline numvec base_transition_row(const InventoryScenario& scn, std::size_t max_level, long m) {
    const long K = static_cast<long>(max_level);
    numvec row(max_level + 1, 0.0);
    for (long delta = scn.delta_min; delta <= scn.delta_max; ++delta) {
        const double g = scn.change_prob(delta);
        const long j = std::clamp(m + delta, 0L, K);
        row[static_cast<std::size_t>(j)] += g;
    }
    double sum = 0.0;
    for (double x : row) sum += x;
    for (double& x : row) x /= sum;
    return row;
}

/// P_hat as a (K+1) x (K+1) row-major matrix.
inline numvec base_transition(const InventoryScenario& scn, const InventoryConfig& cfg) {
    const std::size_t n = cfg.n_states();
    numvec P(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = base_transition_row(scn, cfg.max_level(), static_cast<long>(i));
        std::copy(row.begin(), row.end(), P.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
    return P;
}

/// Kernel under action a. When the arriving batch would expire, the surplus above
/// the post-procurement level m = i + n_a is disposed, so that mass moves to j = m.
inline numvec action_transition_row(const InventoryScenario& scn, const InventoryConfig& cfg,
                                    std::size_t i, std::size_t a) {
    if (a >= cfg.n_actions()) throw Error("action_transition: action out of range");
    const long K = static_cast<long>(cfg.max_level());
    const long m = static_cast<long>(i + cfg.added(a));
    const auto hat = base_transition_row(scn, cfg.max_level(), m);
    numvec row = hat;
    if (m <= K) {
        double expired = 0.0;
        for (long j = m + 1; j <= std::min(K, m + scn.delta_max); ++j) {
            const double fe = erlang_expire(scn, j);
            expired += fe * hat[static_cast<std::size_t>(j)];
            row[static_cast<std::size_t>(j)] = (1.0 - fe) * hat[static_cast<std::size_t>(j)];
        }
        row[static_cast<std::size_t>(m)] += expired;
    }
    double sum = 0.0;
    for (double x : row) sum += x;
    for (double& x : row) x /= sum;
    return row;
}

/// Expected one-period cost h i + DC + SC + procurement, times cost_scale.
inline double action_cost(const InventoryScenario& scn, const InventoryConfig& cfg, std::size_t i,
                          std::size_t a) {
    if (a >= cfg.n_actions()) throw Error("action_cost: action out of range");
    const long K = static_cast<long>(cfg.max_level());
    const long m = static_cast<long>(i + cfg.added(a));
    const auto hat = base_transition_row(scn, cfg.max_level(), m);

    double expired = 0.0;
    for (long delta = 1; delta <= std::min(K - m, scn.delta_max); ++delta)
        expired += erlang_expire(scn, m + delta) * hat[static_cast<std::size_t>(m + delta)] *
                   static_cast<double>(delta);
    double overflow = 0.0, shortage = 0.0;
    for (long delta = scn.delta_min; delta <= scn.delta_max; ++delta) {
        const double g = scn.change_prob(delta);
        const long level = m + delta;
        if (level > K) overflow += g * static_cast<double>(level - K);
        if (level < 0) shortage += g * static_cast<double>(-level);
    }
    const double dc = (expired + overflow) * cfg.unit_disposal;
    const double sc = shortage * cfg.unit_shortage;
    return (cfg.unit_holding * static_cast<double>(i) + dc + sc + cfg.action_cost(a)) * cfg.cost_scale;
}

inline ScenarioParams build_scenario(const InventoryScenario& scn, const InventoryConfig& cfg) {
    const std::size_t n = cfg.n_states(), m = cfg.n_actions();
    ScenarioParams p(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < m; ++a) {
            p.cost(i, a) = action_cost(scn, cfg, i, a);
            const auto row = action_transition_row(scn, cfg, i, a);
            std::copy(row.begin(), row.end(), p.row(i, a).begin());
        }
    return p;
}

/// Rates drawn uniformly from the configured ranges (converted to batches),
/// shelf life uniform on the integer range.
inline std::vector<InventoryScenario> sample_scenarios(const InventoryConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.rng_seed);
    std::uniform_real_distribution<double> dem(cfg.demand_lo, cfg.demand_hi);
    std::uniform_real_distribution<double> sup(cfg.supply_lo, cfg.supply_hi);
    std::uniform_int_distribution<int> life(cfg.shelf_life_lo, cfg.shelf_life_hi);
    const double batch = static_cast<double>(cfg.batch_size);
    std::vector<InventoryScenario> out;
    out.reserve(cfg.n_scenarios);
    for (std::size_t s = 0; s < cfg.n_scenarios; ++s) {
        const double mu_d = dem(rng) / batch;
        const double mu_u = sup(rng) / batch;
        const int t_e = life(rng);
        out.push_back(make_scenario(mu_d, mu_u, t_e, cfg.tail_eps));
    }
    return out;
}

/// Equiprobable scenarios and a uniform initial distribution.
inline UncertainMdp build_instance(const InventoryConfig& cfg, const std::vector<InventoryScenario>& scenarios) {
    cfg.validate();
    if (scenarios.empty()) throw InvalidModel("inventory: no scenarios");
    std::vector<ScenarioParams> params;
    params.reserve(scenarios.size());
    for (const auto& s : scenarios) params.push_back(build_scenario(s, cfg));
    const std::size_t n = cfg.n_states();
    const numvec q(n, 1.0 / static_cast<double>(n));
    const numvec probs(scenarios.size(), 1.0 / static_cast<double>(scenarios.size()));
    return UncertainMdp(cfg.gamma, q, std::move(params), probs);
}

inline UncertainMdp generate_instance(const InventoryConfig& cfg) {
    return build_instance(cfg, sample_scenarios(cfg));
}

} // namespace qmdp
