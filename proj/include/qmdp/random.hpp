#pragma once

// Seeded random instances for tests and experiments.

#include "qmdp/mdp.hpp"

#include <random>

namespace qmdp {

struct RandomInstanceSpec {
    std::size_t n_states = 4;
    std::size_t n_actions = 3;
    std::size_t n_scenarios = 4;
    double gamma = 0.9;
    double max_cost = 10.0;
    double zero_prob = 0.3;    ///< chance that a transition entry is zeroed (the diagonal never is)
    bool equiprobable = true;  ///< otherwise scenario probabilities are drawn at random
    std::uint64_t seed = 1;
};

inline UncertainMdp random_instance(const RandomInstanceSpec& spec) {
    if (spec.n_states == 0 || spec.n_actions == 0 || spec.n_scenarios == 0)
        throw InvalidModel("random_instance: empty dimension");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t n = spec.n_states, m = spec.n_actions;

    std::vector<ScenarioParams> scs;
    for (std::size_t s = 0; s < spec.n_scenarios; ++s) {
        ScenarioParams sc(n, m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < m; ++a) {
                sc.cost(i, a) = spec.max_cost * unit(rng);
                auto row = sc.row(i, a);
                double sum = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double x = unit(rng);
                    row[j] = (j != i && unit(rng) < spec.zero_prob) ? 0.0 : x + 1e-3;
                    sum += row[j];
                }
                for (double& x : row) x /= sum;
            }
        scs.push_back(std::move(sc));
    }

    numvec probs(spec.n_scenarios, 1.0 / static_cast<double>(spec.n_scenarios));
    if (!spec.equiprobable) {
        double sum = 0.0;
        for (double& p : probs) sum += (p = 0.1 + unit(rng));
        for (double& p : probs) p /= sum;
    }
    const numvec q(n, 1.0 / static_cast<double>(n));
    return UncertainMdp(spec.gamma, q, std::move(scs), std::move(probs));
}

} // namespace qmdp
