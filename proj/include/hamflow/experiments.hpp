#pragma once

// Batch experiment runner behind the CLI: JSON configs (validated against
// the published schema in tools/experiment-schema.json, unknown keys
// rejected), deterministic CSV outputs whose headers name the quantities
// they tabulate, and plain two-column plot data.

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "hamflow/acceptance.hpp"

namespace hamflow {

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

namespace expdetail {

inline void require_keys(const json& obj, const std::string& where, const std::set<std::string>& required,
                         const std::set<std::string>& optional) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& k : required)
        if (!obj.contains(k)) throw ConfigError(where + " is missing required key '" + k + "'");
    for (const auto& [k, v] : obj.items())
        if (!required.count(k) && !optional.count(k))
            throw ConfigError(where + " has unknown key '" + k + "'");
}

inline const std::set<std::string> kExperiments = {"curvature", "riccati", "bochner", "compare", "mcp",
                                                   "heat",      "mms",     "entropyflow", "harmonic",
                                                   "transport"};

struct Csv {
    std::ofstream out;
    explicit Csv(const std::string& path) : out(path) {
        if (!out) throw Error("cannot open " + path);
        out.precision(17);
    }
    void header(const std::vector<std::string>& cols) {
        for (size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
        out << '\n';
    }
    void row(const std::vector<double>& vals, const std::string& tag = "") {
        bool first = true;
        if (!tag.empty()) {
            out << tag;
            first = false;
        }
        for (double v : vals) {
            out << (first ? "" : ",") << v;
            first = false;
        }
        out << '\n';
    }
};

inline std::string out_path(const json& cfg, const std::string& outdir, const std::string& fallback) {
    std::string name = fallback;
    if (cfg.contains("output") && cfg.at("output").contains("csv"))
        name = cfg.at("output").at("csv").get<std::string>();
    return (std::filesystem::path(outdir) / name).string();
}

inline ScalarField field_from(const json& cfg, const char* key, int n) {
    if (!cfg.contains(key)) throw ConfigError(std::string("experiment needs '") + key + "'");
    return make_scalar_field(cfg.at(key), n);
}

}  // namespace expdetail

inline void validate_config(const json& cfg) {
    using namespace expdetail;
    require_keys(cfg, "config", {"experiment"},
                 {"hamiltonian", "weight", "grid", "trajectory", "tolerances", "output", "seed", "states",
                  "u", "x0", "T", "dt_factor", "model", "K", "N", "t0", "t_measure", "samples", "points",
                  "Ns", "fixture", "k_list", "boundary", "a", "horizon", "p", "t_lo", "t_hi"});
    const std::string exp = cfg.at("experiment").get<std::string>();
    if (!kExperiments.count(exp)) {
        std::string all;
        for (const auto& e : kExperiments) all += " " + e;
        throw ConfigError("unknown experiment '" + exp + "'; available:" + all);
    }
    if (cfg.contains("hamiltonian"))
        require_keys(cfg.at("hamiltonian"), "hamiltonian", {"name"}, {"params"});
    if (cfg.contains("output"))
        require_keys(cfg.at("output"), "output", {}, {"csv", "dump", "plot"});
    if (cfg.contains("grid"))
        require_keys(cfg.at("grid"), "grid", {}, {"cells", "length", "amp", "offset", "weight"});
    if (cfg.contains("trajectory"))
        require_keys(cfg.at("trajectory"), "trajectory", {}, {"x0", "alpha0", "T", "steps_per_unit"});
    if (cfg.contains("tolerances"))
        require_keys(cfg.at("tolerances"), "tolerances", {}, {"scale"});
}

inline ChartHamiltonian hamiltonian_from(const json& cfg) {
    if (!cfg.contains("hamiltonian")) throw ConfigError("experiment needs a 'hamiltonian'");
    const json& h = cfg.at("hamiltonian");
    return make_builtin(h.at("name").get<std::string>(), h.value("params", json::object()));
}

// returns the list of files written
inline std::vector<std::string> run_experiment(const json& cfg, const std::string& outdir) {
    using namespace expdetail;
    validate_config(cfg);
    std::filesystem::create_directories(outdir);
    const std::string exp = cfg.at("experiment").get<std::string>();
    std::vector<std::string> files;

    if (exp == "curvature") {
        ChartHamiltonian H = hamiltonian_from(cfg);
        const int n = H.dim();
        WeightField w = make_weight(cfg.value("weight", json()), n);
        std::vector<CotangentState> states;
        if (cfg.contains("states")) {
            for (const auto& st : cfg.at("states"))
                states.push_back({vector_from_json(st.at("x")), vector_from_json(st.at("alpha"))});
        } else {
            std::mt19937 rng(cfg.value("seed", 1234));
            std::uniform_real_distribution<double> u(-0.5, 0.5);
            const int samples = cfg.value("samples", 4);
            for (int s = 0; s < samples; ++s) {
                VectorXd x(n), a(n);
                for (int i = 0; i < n; ++i) {
                    x[i] = u(rng);
                    a[i] = u(rng) + 0.6;
                }
                states.push_back({x, a});
            }
        }
        std::vector<double> Ns = {static_cast<double>(n) + 1.0, 2.0 * n, 1e6};
        if (cfg.contains("Ns")) {
            Ns.clear();
            for (const auto& v : cfg.at("Ns")) Ns.push_back(v.get<double>());
        }
        const std::string path = out_path(cfg, outdir, "curvature.csv");
        Csv csv(path);
        std::vector<std::string> cols;
        for (int i = 0; i < n; ++i) cols.push_back("x" + std::to_string(i + 1));
        for (int i = 0; i < n; ++i) cols.push_back("alpha_" + std::to_string(i + 1));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                cols.push_back("R_" + std::to_string(i + 1) + std::to_string(j + 1));
        cols.push_back("ric");
        for (double N : Ns) {
            std::ostringstream nm;
            nm << "ric_N" << N;
            cols.push_back(nm.str());
        }
        csv.header(cols);
        for (const auto& st : states) {
            CurvatureReport rep = curvature_at(H, st);
            std::vector<double> row;
            for (int i = 0; i < n; ++i) row.push_back(st.x[i]);
            for (int i = 0; i < n; ++i) row.push_back(st.alpha[i]);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) row.push_back(rep.R(i, j));
            row.push_back(rep.ric);
            for (double N : Ns) row.push_back(weighted_ricci(H, w, st, N).value);
            csv.row(row);
        }
        files.push_back(path);
    } else if (exp == "riccati") {
        ChartHamiltonian H = hamiltonian_from(cfg);
        const int n = H.dim();
        WeightField w = make_weight(cfg.value("weight", json()), n);
        ScalarField u = field_from(cfg, "u", n);
        const VectorXd x0 = vector_from_json(cfg.at("x0"));
        const double T = cfg.value("T", 0.3);
        HjEvolution ev = hj_transport(H, w, u, x0, T);
        RiccatiResidual res = riccati_residual(H, w, u, x0, T);
        const std::string path = out_path(cfg, outdir, "riccati.csv");
        Csv csv(path);
        std::vector<std::string> cols = {"t"};
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                cols.push_back("hess_" + std::to_string(i + 1) + std::to_string(j + 1));
        cols.push_back("delta_Hm");
        cols.push_back("mRicc_residual");
        cols.push_back("wRicc_residual");
        csv.header(cols);
        for (const auto& st : ev.states) {
            std::vector<double> row = {st.t};
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) row.push_back(st.hess(i, j));
            row.push_back(st.trace_lap);
            row.push_back(res.matrix_residual);
            row.push_back(res.trace_residual);
            csv.row(row);
        }
        files.push_back(path);
    } else if (exp == "bochner") {
        ChartHamiltonian H = hamiltonian_from(cfg);
        const int n = H.dim();
        WeightField w = make_weight(cfg.value("weight", json()), n);
        ScalarField u = field_from(cfg, "u", n);
        std::vector<double> Ns = {static_cast<double>(n), 2.0 * n, 1e6};
        const std::string path = out_path(cfg, outdir, "bochner.csv");
        Csv csv(path);
        std::vector<std::string> cols;
        for (int i = 0; i < n; ++i) cols.push_back("x" + std::to_string(i + 1));
        cols.insert(cols.end(), {"bw_lhs", "bw_rhs", "bochner_defect", "delta_Hm"});
        for (double N : Ns) {
            std::ostringstream nm;
            nm << "nbw_slack_N" << N;
            cols.push_back(nm.str());
        }
        csv.header(cols);
        for (const auto& pt : cfg.at("points")) {
            const VectorXd x = vector_from_json(pt);
            BochnerReport rep = bochner_residual(H, w, u, x, Ns);
            std::vector<double> row;
            for (int i = 0; i < n; ++i) row.push_back(x[i]);
            row.insert(row.end(), {rep.lhs, rep.rhs, rep.defect, rep.lap_m});
            for (auto [N, slack] : rep.n_slack) row.push_back(slack);
            csv.row(row);
        }
        files.push_back(path);
    } else if (exp == "compare" || exp == "mcp") {
        const double K = cfg.value("K", 1.0), N = cfg.value("N", 2.0);
        const std::string path = out_path(cfg, outdir, exp + ".csv");
        Csv csv(path);
        if (exp == "compare") {
            const int n = static_cast<int>(N);
            const std::string model = cfg.value("model", "constant");
            MatrixXd Rm = (K / N) * MatrixXd::Identity(n, n);
            if (model == "flat_radial") Rm = MatrixXd::Zero(n, n);
            auto R = [Rm](double) { return Rm; };
            ComparisonResult res = laplacian_comparison_check(
                R, [](double) { return 0.0; }, K, N, n, cfg.value("t0", 1e-3), cfg.value("T", 2.0),
                cfg.value("t_measure", 0.05));
            csv.header({"t", "delta_Hm", "s_KN_bound", "violation"});
            for (size_t k = 0; k < res.times.size(); ++k)
                csv.row({res.times[k], res.delta[k], res.bound[k], res.delta[k] - res.bound[k]});
        } else {
            const std::string fixture = cfg.value("fixture", "equality");
            const double lo = cfg.value("t_lo", 0.05), hi = cfg.value("t_hi", 2.0);
            const int samples = cfg.value("samples", 200);
            std::vector<double> ts, vs;
            for (int k = 0; k < samples; ++k) {
                const double t = lo + (hi - lo) * k / (samples - 1);
                ts.push_back(t);
                if (fixture == "equality")
                    vs.push_back(N * std::log(s_KN(K, N, t)));
                else if (fixture == "constant")
                    vs.push_back(0.0);
                else if (fixture == "sphere")
                    vs.push_back(std::log(std::sin(t)));
                else
                    throw ConfigError("unknown mcp fixture '" + fixture + "'");
            }
            McpResult m = mcp_ratio_check(ts, vs, K, N);
            csv.header({"t", "varsigma_eta", "mcp_ratio", "s_KN_bound", "monotone", "equivalent"});
            for (size_t k = 0; k < ts.size(); ++k)
                csv.row({ts[k], vs[k], std::exp(vs[k]) / std::pow(s_KN(K, N, ts[k]), N),
                         s_KN_bound(K, N, ts[k]), m.ratio_monotone ? 1.0 : 0.0,
                         m.equivalent ? 1.0 : 0.0});
        }
        files.push_back(path);
    } else if (exp == "heat" || exp == "entropyflow" || exp == "mms") {
        ChartHamiltonian H = hamiltonian_from(cfg);
        if (H.dim() != 1) throw ConfigError("grid experiments are 1D");
        const json gridcfg = cfg.value("grid", json::object());
        const int cells = gridcfg.value("cells", 128);
        GridField f = make_grid_1d(cells, gridcfg.value("length", 1.0));
        const double amp = gridcfg.value("amp", 0.5), offset = gridcfg.value("offset", 1.0);
        for (int i = 0; i < cells; ++i)
            f.values[static_cast<size_t>(i)] =
                offset + amp * std::sin(2.0 * M_PI * f.coord(i)[0] / gridcfg.value("length", 1.0));
        const double T = cfg.value("T", 0.05);
        const double dt = cfg.value("dt_factor", 0.5) * stable_dt(H, f);
        const std::string path = out_path(cfg, outdir, exp + ".csv");
        if (exp == "mms") {
            HeatResult ref = heat_solve_explicit(H, f, T, dt);
            Csv csv(path);
            csv.header({"k", "delta", "l2_gap_to_explicit"});
            std::vector<int> ks = {4, 8, 16};
            if (cfg.contains("k_list")) {
                ks.clear();
                for (const auto& v : cfg.at("k_list")) ks.push_back(v.get<int>());
            }
            for (int k : ks) {
                GridField cur = f;
                for (int i = 0; i < k; ++i) cur = minimizing_movement_step(H, cur, T / k);
                csv.row({static_cast<double>(k), T / k, cur.l2m_norm(ref.field)});
            }
            files.push_back(path);
        } else {
            HeatResult res = exp == "heat" ? heat_solve_explicit(H, f, T, dt)
                                           : entropy_flow_solve(H, f, T, dt);
            write_diagnostics_csv(path, res.diag);
            files.push_back(path);
            if (cfg.contains("output") && cfg.at("output").contains("dump")) {
                const std::string prefix =
                    (std::filesystem::path(outdir) / cfg.at("output").at("dump").get<std::string>()).string();
                write_field_dump(prefix, res.field);
                files.push_back(prefix + ".bin");
                files.push_back(prefix + ".json");
            }
            if (cfg.contains("output") && cfg.at("output").contains("plot")) {
                const std::string ppath =
                    (std::filesystem::path(outdir) / cfg.at("output").at("plot").get<std::string>()).string();
                std::ofstream plot(ppath);
                plot.precision(17);
                for (size_t k = 0; k < res.diag.times.size(); ++k)
                    plot << res.diag.times[k] << ' ' << res.diag.energy[k] << '\n';
                files.push_back(ppath);
            }
        }
    } else if (exp == "harmonic") {
        ChartHamiltonian H = hamiltonian_from(cfg);
        if (H.dim() != 1) throw ConfigError("the harmonic experiment is 1D");
        const json gridcfg = cfg.value("grid", json::object());
        const int cells = gridcfg.value("cells", 64);
        GridField f = make_grid_1d(cells, gridcfg.value("length", 1.0), false);
        const json b = cfg.value("boundary", json::array({0.0, 1.0}));
        std::vector<bool> mask(static_cast<size_t>(cells), false);
        mask[0] = mask[static_cast<size_t>(cells - 1)] = true;
        f.values[0] = b[0].get<double>();
        f.values[static_cast<size_t>(cells - 1)] = b[1].get<double>();
        GridField sol = dirichlet_harmonic(H, f, mask);
        std::vector<double> g = energy_gradient_flux(H, sol);
        const std::string path = out_path(cfg, outdir, "harmonic.csv");
        Csv csv(path);
        csv.header({"cell", "x", "u", "laplacian_residual"});
        for (int i = 0; i < cells; ++i)
            csv.row({static_cast<double>(i), sol.coord(i)[0], sol.values[static_cast<size_t>(i)],
                     mask[static_cast<size_t>(i)] ? 0.0 : g[static_cast<size_t>(i)] / sol.cell_mass(i)});
        files.push_back(path);
    } else if (exp == "transport") {
        const double a = cfg.value("a", 0.8);
        const double T = cfg.value("horizon", 1.0), K = cfg.value("K", 1.0);
        Grid1D g{-9.0, 9.0 + a, cfg.value("samples", 4096)};
        auto gauss_psi = [](double x) { return 0.5 * x * x + 0.91893853320467274178; };
        DensityProfile mu = make_profile(
            g, [a](double x) { return std::exp(a * x - 0.5 * a * a); }, gauss_psi);
        DensityProfile m0 = make_profile(g, [](double) { return 1.0; }, gauss_psi);
        DualPair1D d = cfg.contains("p") ? DualPair1D::power(cfg.at("p").get<double>())
                                         : DualPair1D::quadratic();
        TalagrandHwi th = talagrand_hwi_check(d, mu, m0, T, K);
        TransportPlan1D plan = monotone_transport(mu, m0, d, T);
        KConvexityResult kc = k_convexity_check(d, plan, mu, K);
        EntropyDerivative ed = entropy_derivative_check(d, plan, mu);
        const std::string path = out_path(cfg, outdir, "transport.csv");
        Csv csv(path);
        csv.header({"fixture", "inequality", "lhs", "rhs", "slack"});
        const std::string fx = "gaussian(a=" + std::to_string(a) + ")";
        csv.row({th.CH, 2.0 / (K * T) * th.ent, th.talagrand_slack}, fx + ",talagrand");
        csv.row({th.ent, T * th.fisher + T * th.intL - 0.5 * K * T * th.CH, th.hwi_slack}, fx + ",hwi");
        csv.row({kc.worst_defect, 0.0, -kc.worst_defect}, fx + ",k-convexity");
        csv.row({ed.rhs, ed.lhs, ed.slack()}, fx + ",entropy-derivative");
        files.push_back(path);
    }
    return files;
}

}  // namespace hamflow
