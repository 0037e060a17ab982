// Builds the five-scenario inventory instance from five_scenarios.csv, solves it
// at alpha = 0.9 and compares the optimum with the heuristics and bounds.
//
//   quickstart [scenario-table.csv]

#include "qmdp/qmdp.hpp"

#include <iostream>

int main(int argc, char** argv) {
    using namespace qmdp;
    const std::string table = argc > 1 ? argv[1] : QMDP_SAMPLES_DIR "/five_scenarios.csv";
    try {
        InventoryConfig cfg;
        const auto mdp = build_instance(cfg, load_scenario_table(table, cfg.tail_eps));
        const double alpha = 0.9;

        const auto cache = compute_bounds(mdp, alpha);
        const auto heur = initial_solution(mdp, cache, alpha);
        const auto res = solve_exact(mdp, alpha, fix_scenarios(cache, heur.value));
        const auto mv = mean_value_policy(mdp);
        const auto m = metrics(mdp, alpha, cache, res, mv);

        std::cout << "states " << mdp.n_states() << ", actions " << mdp.n_actions() << ", scenarios "
                  << mdp.n_scenarios() << "\n";
        std::cout << "bounds [" << cache.b_l << ", " << cache.b_u << "]\n";
        std::cout << "optimal VaR " << res.value << " (" << res.nodes << " nodes)\n";
        std::cout << "vehicles by inventory level:";
        for (std::size_t i = 0; i < mdp.n_states(); ++i) std::cout << ' ' << res.policy.action(i);
        std::cout << (res.policy.is_monotone() ? " (monotone)\n" : " (not monotone)\n");
        std::cout << "heuristic VaR " << heur.value << ", mean-value VaR " << m.mv << ", expected-value VaR "
                  << m.e_var << "\n";
        std::cout << "%VPI " << m.pct_vpi << ", %VSS " << m.pct_vss << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
