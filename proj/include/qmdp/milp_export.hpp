#pragma once

// Writers for the mixed-integer formulations in LP text format. Nothing here
// solves a model; the files are meant for an external MILP solver.

#include "qmdp/preprocess.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qmdp {

enum class ModelKind { QMDP_D_bigM, QMDP_D_McCormick, QMDP_R_McCormick_relax, QMDP_M_bigM };

inline const char* to_string(ModelKind k) {
    switch (k) {
    case ModelKind::QMDP_D_bigM: return "QMDP_D_bigM";
    case ModelKind::QMDP_D_McCormick: return "QMDP_D_McCormick";
    case ModelKind::QMDP_R_McCormick_relax: return "QMDP_R_McCormick_relax";
    default: return "QMDP_M_bigM";
    }
}

inline std::optional<ModelKind> parse_model_kind(std::string_view name) {
    for (auto k : {ModelKind::QMDP_D_bigM, ModelKind::QMDP_D_McCormick,
                   ModelKind::QMDP_R_McCormick_relax, ModelKind::QMDP_M_bigM})
        if (name == to_string(k)) return k;
    return std::nullopt;
}

struct ModelVariant {
    ModelKind kind = ModelKind::QMDP_D_bigM;
    bool uses_cache = true; ///< bound-tightened coefficients; otherwise every big-M is 1e6

    bool mccormick() const {
        return kind == ModelKind::QMDP_D_McCormick || kind == ModelKind::QMDP_R_McCormick_relax;
    }
    bool binary_policy() const { return kind != ModelKind::QMDP_R_McCormick_relax; }
    bool monotone() const { return kind == ModelKind::QMDP_M_bigM; }
    std::string name() const { return std::string(to_string(kind)) + (uses_cache ? "" : "_basic"); }
};

inline constexpr double kBasicBigM = 1e6;

struct ModelCounts {
    std::size_t rows = 0;
    std::size_t variables = 0;
    std::size_t binaries = 0;
    std::size_t x_variables = 0;
    std::size_t cut_rows = 0;
    std::size_t monotone_rows = 0;
    double max_quantile_m = 0.0; ///< largest coefficient M used in the quantile rows
};

namespace detail {

inline std::string lp_number(double x) {
    if (x == 0.0) return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

/// Linear row with terms kept in insertion order; repeated names are merged.
class LpRow {
public:
    void add(const std::string& var, double coef) {
        for (auto& [name, c] : terms_)
            if (name == var) {
                c += coef;
                return;
            }
        terms_.emplace_back(var, coef);
    }

    /// Writes "name: terms sense rhs", wrapping long rows.
    void write(std::ostream& os, const std::string& name, std::string_view sense, double rhs) const {
        std::string line = " " + name + ":";
        bool any = false;
        auto flush_if_long = [&] {
            if (line.size() > 200) {
                os << line << '\n';
                line = "  ";
            }
        };
        for (const auto& [var, c] : terms_) {
            if (c == 0.0) continue;
            line += c < 0.0 ? " - " : (any ? " + " : " ");
            const double mag = std::abs(c);
            if (mag != 1.0) line += lp_number(mag) + " ";
            line += var;
            any = true;
            flush_if_long();
        }
        if (!any) line += " 0 " + terms_.front().first; // keep the row syntactically valid
        line += " ";
        line += sense;
        line += " " + lp_number(rhs);
        os << line << '\n';
    }

private:
    std::vector<std::pair<std::string, double>> terms_;
};

inline std::string w_name(std::size_t i, std::size_t a) { return "w_" + std::to_string(i) + "_" + std::to_string(a); }
inline std::string z_name(std::size_t s) { return "z_" + std::to_string(s); }
inline std::string v_name(std::size_t i, std::size_t s) { return "v_" + std::to_string(i) + "_" + std::to_string(s); }
inline std::string x_name(std::size_t i, std::size_t j, std::size_t a, std::size_t s) {
    return "x_" + std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(a) + "_" + std::to_string(s);
}

} // namespace detail

/// Writes the model for `variant`; `cache` is required when variant.uses_cache.
/// In cached mode the quantile row of scenario s uses M_s = max(0, b_bar[s] - b_l):
/// a single M = b_u - b_l can cut off optimal policies whose uncovered scenarios
/// cost more than b_u.
inline ModelCounts export_model(std::ostream& os, const UncertainMdp& mdp, double alpha,
                                const ModelVariant& variant, const BoundsCache* cache) {
    using detail::LpRow, detail::lp_number, detail::w_name, detail::z_name, detail::v_name, detail::x_name;
    check_alpha(alpha);
    if (variant.uses_cache) {
        if (!cache) throw Error("export_model: bounds cache required for tightened coefficients");
        if (cache->n_scenarios() != mdp.n_scenarios() || cache->n_states() != mdp.n_states())
            throw Error("export_model: bounds cache does not match the model");
        if (cache->alpha != alpha) throw Error("export_model: bounds cache was computed for a different alpha");
    }
    const std::size_t n = mdp.n_states(), m = mdp.n_actions(), S = mdp.n_scenarios();
    const double gamma = mdp.gamma();
    const bool tight = variant.uses_cache;
    auto lo = [&](std::size_t i, std::size_t s) { return tight ? cache->lower(i, s) : 0.0; };
    auto hi = [&](std::size_t i, std::size_t s) { return tight ? cache->upper(i, s) : kBasicBigM; };
    auto big_m_is = [&](std::size_t i, std::size_t s) { return tight ? cache->big_m(i, s) : kBasicBigM; };
    auto big_m_s = [&](std::size_t s) { return tight ? cache->big_m_scenario[s] : kBasicBigM; };

    ModelCounts cnt;
    os << "\\ " << variant.name() << " alpha=" << lp_number(alpha) << " gamma=" << lp_number(gamma)
       << " states=" << n << " actions=" << m << " scenarios=" << S << '\n';
    os << "Minimize\n obj: y\nSubject To\n";

    for (std::size_t i = 0; i < n; ++i) {
        LpRow r;
        for (std::size_t a = 0; a < m; ++a) r.add(w_name(i, a), 1.0);
        r.write(os, "assign_" + std::to_string(i), "=", 1.0);
        ++cnt.rows;
    }
    {
        LpRow r;
        for (std::size_t s = 0; s < S; ++s) r.add(z_name(s), mdp.prob(s));
        r.write(os, "cover", ">=", alpha);
        ++cnt.rows;
    }
    for (std::size_t s = 0; s < S; ++s) {
        // q.v^s <= y + (1 - z^s) M_s
        const double ms = big_m_s(s);
        cnt.max_quantile_m = std::max(cnt.max_quantile_m, ms);
        LpRow r;
        for (std::size_t i = 0; i < n; ++i) r.add(v_name(i, s), mdp.q()[i]);
        r.add("y", -1.0);
        r.add(z_name(s), ms);
        r.write(os, "quant_" + std::to_string(s), "<=", ms);
        ++cnt.rows;
    }

    if (!variant.mccormick()) {
        // v_i^s >= c_i^s(a) + gamma P_i^s(a) v^s - (1 - w_ia) M_is
        for (std::size_t s = 0; s < S; ++s) {
            const auto& sc = mdp.scenario(s);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t a = 0; a < m; ++a) {
                    const double mis = big_m_is(i, s);
                    LpRow r;
                    r.add(v_name(i, s), 1.0);
                    const auto row = sc.row(i, a);
                    for (std::size_t j = 0; j < n; ++j)
                        if (row[j] != 0.0) r.add(v_name(j, s), -gamma * row[j]);
                    r.add(w_name(i, a), -mis);
                    r.write(os, "bellman_" + std::to_string(i) + "_" + std::to_string(a) + "_" + std::to_string(s),
                            ">=", sc.cost(i, a) - mis);
                    ++cnt.rows;
                }
        }
    } else {
        for (std::size_t s = 0; s < S; ++s) {
            const auto& sc = mdp.scenario(s);
            for (std::size_t i = 0; i < n; ++i) {
                LpRow r;
                r.add(v_name(i, s), 1.0);
                for (std::size_t a = 0; a < m; ++a) r.add(w_name(i, a), -sc.cost(i, a));
                for (std::size_t a = 0; a < m; ++a) {
                    const auto row = sc.row(i, a);
                    for (std::size_t j = 0; j < n; ++j)
                        if (row[j] != 0.0) r.add(x_name(i, j, a, s), -gamma * row[j]);
                }
                r.write(os, "bellman_" + std::to_string(i) + "_" + std::to_string(s), ">=", 0.0);
                ++cnt.rows;
            }
        }
        // x = v_j w_ia through its McCormick envelope
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t a = 0; a < m; ++a) {
                        const std::string x = x_name(i, j, a, s), w = w_name(i, a), v = v_name(j, s);
                        const std::string tag = std::to_string(i) + "_" + std::to_string(j) + "_" +
                                                std::to_string(a) + "_" + std::to_string(s);
                        const double l = lo(j, s), u = hi(j, s);
                        LpRow r1, r2, r3, r4;
                        r1.add(x, 1.0);
                        r1.add(w, -l);
                        r1.write(os, "mc_lw_" + tag, ">=", 0.0);
                        r2.add(x, 1.0);
                        r2.add(w, -u);
                        r2.write(os, "mc_uw_" + tag, "<=", 0.0);
                        r3.add(x, 1.0);
                        r3.add(v, -1.0);
                        r3.add(w, -u);
                        r3.write(os, "mc_vu_" + tag, ">=", -u);
                        r4.add(x, 1.0);
                        r4.add(v, -1.0);
                        r4.add(w, -l);
                        r4.write(os, "mc_vl_" + tag, "<=", -l);
                        cnt.rows += 4;
                        ++cnt.x_variables;
                    }
    }

    if (tight) {
        for (std::size_t s = 0; s < S; ++s) {
            LpRow r;
            r.add("y", 1.0);
            r.add(z_name(s), -valid_lb_cut(*cache, s));
            r.write(os, "cut_" + std::to_string(s), ">=", 0.0);
            ++cnt.rows;
            ++cnt.cut_rows;
        }
    }

    if (variant.monotone()) {
        // w_ia <= sum_{a' <= a} w_i'a' for i' > i
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t i2 = i + 1; i2 < n; ++i2)
                for (std::size_t a = 0; a < m; ++a) {
                    LpRow r;
                    r.add(w_name(i, a), 1.0);
                    for (std::size_t a2 = 0; a2 <= a; ++a2) r.add(w_name(i2, a2), -1.0);
                    r.write(os, "mono_" + std::to_string(i) + "_" + std::to_string(i2) + "_" + std::to_string(a),
                            "<=", 0.0);
                    ++cnt.rows;
                    ++cnt.monotone_rows;
                }
    }

    os << "Bounds\n";
    if (tight)
        os << " " << lp_number(cache->b_l) << " <= y <= " << lp_number(cache->b_u) << '\n';
    else
        os << " y >= 0\n";
    const bool bound_v = tight || variant.mccormick();
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t i = 0; i < n; ++i) {
            if (bound_v)
                os << " " << lp_number(lo(i, s)) << " <= " << v_name(i, s) << " <= " << lp_number(hi(i, s)) << '\n';
            else
                os << " " << v_name(i, s) << " >= 0\n";
        }
    if (variant.mccormick())
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (lo(j, s) < 0.0)
                        for (std::size_t a = 0; a < m; ++a) os << " " << x_name(i, j, a, s) << " free\n";
    if (!variant.binary_policy())
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < m; ++a) os << " 0 <= " << w_name(i, a) << " <= 1\n";
    if (tight)
        for (std::size_t s = 0; s < S; ++s) {
            if (cache->z_fixed[s] == ScenarioFix::forced0) os << " 0 <= " << z_name(s) << " <= 0\n";
            if (cache->z_fixed[s] == ScenarioFix::forced1) os << " 1 <= " << z_name(s) << " <= 1\n";
        }

    os << "Binary\n";
    if (variant.binary_policy())
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < m; ++a) {
                os << " " << w_name(i, a) << '\n';
                ++cnt.binaries;
            }
    for (std::size_t s = 0; s < S; ++s) {
        os << " " << z_name(s) << '\n';
        ++cnt.binaries;
    }
    os << "End\n";

    cnt.variables = 1 + n * m + S + n * S + cnt.x_variables;
    return cnt;
}

inline ModelCounts export_model(const std::filesystem::path& path, const UncertainMdp& mdp, double alpha,
                                const ModelVariant& variant, const BoundsCache* cache) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("export_model: cannot open " + path.string() + " for writing");
    auto cnt = export_model(out, mdp, alpha, variant, cache);
    out.flush();
    if (!out) throw Error("export_model: write to " + path.string() + " failed");
    return cnt;
}

/// "<instance>_<variant>_<alpha>.lp"
inline std::string model_file_name(std::string_view instance, const ModelVariant& variant, double alpha) {
    return std::string(instance) + "_" + variant.name() + "_" + detail::lp_number(alpha) + ".lp";
}

} // namespace qmdp
