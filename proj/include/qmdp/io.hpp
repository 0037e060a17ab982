#pragma once

// JSON instance files, inventory configuration files and scenario tables.
//
// Instance layout:
//   {"gamma": g, "q": [...], "probs": [...],
//    "scenarios": [{"cost": [[c_ia]], "trans": [[[P_iaj]]]}, ...]}

#include "qmdp/inventory.hpp"
#include "qmdp/mdp.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace qmdp {

using json = nlohmann::json;

inline json instance_to_json(const UncertainMdp& mdp) {
    json j;
    j["gamma"] = mdp.gamma();
    j["q"] = mdp.q();
    j["probs"] = mdp.probs();
    json scs = json::array();
    for (const auto& sc : mdp.scenarios()) {
        json cost = json::array(), trans = json::array();
        for (std::size_t i = 0; i < sc.n_states(); ++i) {
            json crow = json::array(), tstate = json::array();
            for (std::size_t a = 0; a < sc.n_actions(); ++a) {
                crow.push_back(sc.cost(i, a));
                const auto r = sc.row(i, a);
                tstate.push_back(numvec(r.begin(), r.end()));
            }
            cost.push_back(std::move(crow));
            trans.push_back(std::move(tstate));
        }
        scs.push_back({{"cost", std::move(cost)}, {"trans", std::move(trans)}});
    }
    j["scenarios"] = std::move(scs);
    return j;
}

namespace detail {

/// Line and column (1-based) of a byte offset.
inline std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t offset) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k < std::min(offset, text.size()); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

inline bool read_numbers(const json& j, numvec& out) {
    if (!j.is_array()) return false;
    out.clear();
    for (const auto& x : j) {
        if (!x.is_number()) return false;
        out.push_back(x.get<double>());
    }
    return true;
}

struct ParsedInstance {
    double gamma = 0.0;
    numvec q, probs;
    std::vector<ScenarioParams> scenarios;
};

/// Structural decoding; dimension and value checks are left to check_model.
inline std::optional<ParsedInstance> decode_instance(const json& j, std::vector<Diagnostic>& issues) {
    ParsedInstance p;
    if (!j.is_object()) {
        issues.push_back({"instance", "top-level value must be an object"});
        return std::nullopt;
    }
    for (const char* key : {"gamma", "q", "probs", "scenarios"})
        if (!j.contains(key)) issues.push_back({"instance", std::string("missing key \"") + key + "\""});
    if (!issues.empty()) return std::nullopt;
    if (!j["gamma"].is_number()) issues.push_back({"gamma", "must be a number"});
    else p.gamma = j["gamma"].get<double>();
    if (!read_numbers(j["q"], p.q)) issues.push_back({"q", "must be an array of numbers"});
    if (!read_numbers(j["probs"], p.probs)) issues.push_back({"probs", "must be an array of numbers"});
    if (!j["scenarios"].is_array()) {
        issues.push_back({"scenarios", "must be an array"});
        return std::nullopt;
    }
    for (std::size_t s = 0; s < j["scenarios"].size(); ++s) {
        const auto& js = j["scenarios"][s];
        const std::string where = "scenario " + std::to_string(s);
        if (!js.is_object() || !js.contains("cost") || !js.contains("trans") || !js["cost"].is_array() ||
            !js["trans"].is_array()) {
            issues.push_back({where, "needs array fields \"cost\" and \"trans\""});
            continue;
        }
        const auto& cost = js["cost"];
        const auto& trans = js["trans"];
        const std::size_t n = cost.size();
        const std::size_t m = n > 0 && cost[0].is_array() ? cost[0].size() : 0;
        if (trans.size() != n) {
            issues.push_back({where, "cost has " + std::to_string(n) + " states but trans has " +
                                         std::to_string(trans.size())});
            continue;
        }
        ScenarioParams sc(n, m);
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) {
            numvec crow;
            if (!read_numbers(cost[i], crow) || crow.size() != m) {
                issues.push_back({where + " state " + std::to_string(i), "cost row must have " +
                                                                           std::to_string(m) + " numbers"});
                ok = false;
                break;
            }
            if (!trans[i].is_array() || trans[i].size() != m) {
                issues.push_back({where + " state " + std::to_string(i),
                                  "trans must have " + std::to_string(m) + " rows"});
                ok = false;
                break;
            }
            for (std::size_t a = 0; a < m; ++a) {
                sc.cost(i, a) = crow[a];
                numvec row;
                if (!read_numbers(trans[i][a], row) || row.size() != n) {
                    issues.push_back({"(s=" + std::to_string(s) + ", i=" + std::to_string(i) +
                                          ", a=" + std::to_string(a) + ")",
                                      "transition row must have " + std::to_string(n) + " numbers"});
                    ok = false;
                    break;
                }
                std::copy(row.begin(), row.end(), sc.row(i, a).begin());
            }
        }
        if (ok) p.scenarios.push_back(std::move(sc));
    }
    if (!issues.empty()) return std::nullopt;
    return p;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::optional<json> parse_json_text(std::string_view text, std::vector<Diagnostic>& issues) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        issues.push_back({"line " + std::to_string(line) + ", column " + std::to_string(col),
                          "JSON parse error"});
        return std::nullopt;
    }
}

} // namespace detail

/// All problems found in an instance text: syntax, structure and model invariants.
inline std::vector<Diagnostic> validate_instance_text(std::string_view text) {
    std::vector<Diagnostic> issues;
    auto j = detail::parse_json_text(text, issues);
    if (!j) return issues;
    auto p = detail::decode_instance(*j, issues);
    if (!p) return issues;
    return check_model(p->gamma, p->q, p->probs, p->scenarios);
}

inline UncertainMdp instance_from_json(const json& j) {
    std::vector<Diagnostic> issues;
    auto p = detail::decode_instance(j, issues);
    if (!p) throw InvalidModel(issues.front().str());
    return UncertainMdp(p->gamma, std::move(p->q), std::move(p->scenarios), std::move(p->probs));
}

inline UncertainMdp parse_instance(std::string_view text) {
    std::vector<Diagnostic> issues;
    auto j = detail::parse_json_text(text, issues);
    if (!j) throw InvalidModel(issues.front().str());
    return instance_from_json(*j);
}

inline UncertainMdp load_instance(const std::filesystem::path& path) {
    return parse_instance(detail::read_file(path));
}

inline void save_instance(const std::filesystem::path& path, const UncertainMdp& mdp) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << instance_to_json(mdp).dump(1) << '\n';
    if (!out) throw Error("write to " + path.string() + " failed");
}

inline json policy_to_json(const Policy& pol) {
    if (pol.is_deterministic()) return {{"actions", pol.actions()}};
    json w = json::array();
    for (std::size_t i = 0; i < pol.n_states(); ++i) {
        numvec row(pol.n_actions());
        for (std::size_t a = 0; a < pol.n_actions(); ++a) row[a] = pol.weight(i, a);
        w.push_back(row);
    }
    return {{"weights", w}};
}

// Inventory configuration. Unknown keys are rejected so that typos do not
// silently fall back to defaults.

inline InventoryConfig inventory_config_from_json(const json& j) {
    if (!j.is_object()) throw InvalidModel("inventory config must be a JSON object");
    InventoryConfig c;
    for (const auto& [key, val] : j.items()) {
        auto num = [&] {
            if (!val.is_number()) throw InvalidModel("inventory config: \"" + key + "\" must be a number");
            return val.get<double>();
        };
        auto count = [&] {
            if (!val.is_number_unsigned()) throw InvalidModel("inventory config: \"" + key + "\" must be a nonnegative integer");
            return val.get<std::size_t>();
        };
        auto range = [&](double& lo, double& hi) {
            if (!val.is_array() || val.size() != 2 || !val[0].is_number() || !val[1].is_number())
                throw InvalidModel("inventory config: \"" + key + "\" must be [lo, hi]");
            lo = val[0].get<double>();
            hi = val[1].get<double>();
        };
        if (key == "capacity_units") c.capacity_units = count();
        else if (key == "batch_size") c.batch_size = count();
        else if (key == "n_vehicles") c.n_vehicles = count();
        else if (key == "packs_per_vehicle") c.packs_per_vehicle = count();
        else if (key == "unit_holding") c.unit_holding = num();
        else if (key == "unit_disposal") c.unit_disposal = num();
        else if (key == "unit_shortage") c.unit_shortage = num();
        else if (key == "vehicle_cost") c.vehicle_cost = num();
        else if (key == "cost_scale") c.cost_scale = num();
        else if (key == "gamma") c.gamma = num();
        else if (key == "alpha") c.alpha = num();
        else if (key == "tail_eps") c.tail_eps = num();
        else if (key == "n_scenarios") c.n_scenarios = count();
        else if (key == "rng_seed") c.rng_seed = count();
        else if (key == "demand_range") range(c.demand_lo, c.demand_hi);
        else if (key == "supply_range") range(c.supply_lo, c.supply_hi);
        else if (key == "shelf_life_range") {
            double lo = 0, hi = 0;
            range(lo, hi);
            c.shelf_life_lo = static_cast<int>(lo);
            c.shelf_life_hi = static_cast<int>(hi);
        } else if (key == "action_costs") {
            if (!detail::read_numbers(val, c.action_costs))
                throw InvalidModel("inventory config: \"action_costs\" must be an array of numbers");
        } else {
            throw InvalidModel("inventory config: unknown key \"" + key + "\"");
        }
    }
    c.validate();
    return c;
}

inline json inventory_config_to_json(const InventoryConfig& c) {
    json j{{"capacity_units", c.capacity_units}, {"batch_size", c.batch_size},
           {"n_vehicles", c.n_vehicles}, {"packs_per_vehicle", c.packs_per_vehicle},
           {"unit_holding", c.unit_holding}, {"unit_disposal", c.unit_disposal},
           {"unit_shortage", c.unit_shortage}, {"vehicle_cost", c.vehicle_cost},
           {"cost_scale", c.cost_scale}, {"gamma", c.gamma}, {"alpha", c.alpha},
           {"tail_eps", c.tail_eps}, {"n_scenarios", c.n_scenarios}, {"rng_seed", c.rng_seed},
           {"demand_range", {c.demand_lo, c.demand_hi}}, {"supply_range", {c.supply_lo, c.supply_hi}},
           {"shelf_life_range", {c.shelf_life_lo, c.shelf_life_hi}}};
    if (!c.action_costs.empty()) j["action_costs"] = c.action_costs;
    return j;
}

inline InventoryConfig load_inventory_config(const std::filesystem::path& path) {
    std::vector<Diagnostic> issues;
    const auto text = detail::read_file(path);
    auto j = detail::parse_json_text(text, issues);
    if (!j) throw InvalidModel(path.string() + ": " + issues.front().str());
    return inventory_config_from_json(*j);
}

/// Scenario table with header "scenario,demand_rate,supply_rate,shelf_life";
/// rates are in batches per period.
inline std::vector<InventoryScenario> parse_scenario_table(std::string_view text, double tail_eps) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    std::vector<InventoryScenario> out;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "scenario,demand_rate,supply_rate,shelf_life")
                throw InvalidModel("scenario table line " + std::to_string(line_no) +
                                   ": expected header scenario,demand_rate,supply_rate,shelf_life");
            header = true;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        if (cells.size() != 4)
            throw InvalidModel("scenario table line " + std::to_string(line_no) + ": expected 4 fields");
        try {
            const double mu_d = std::stod(cells[1]);
            const double mu_u = std::stod(cells[2]);
            const int t_e = std::stoi(cells[3]);
            out.push_back(make_scenario(mu_d, mu_u, t_e, tail_eps));
        } catch (const std::logic_error&) {
            throw InvalidModel("scenario table line " + std::to_string(line_no) + ": malformed number");
        }
    }
    if (out.empty()) throw InvalidModel("scenario table has no rows");
    return out;
}

inline std::vector<InventoryScenario> load_scenario_table(const std::filesystem::path& path, double tail_eps) {
    return parse_scenario_table(detail::read_file(path), tail_eps);
}

} // namespace qmdp
