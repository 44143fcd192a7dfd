// Acceptance checks. Prints one PASS/FAIL line per criterion.
// Exits non-zero on failures only when OPTOCAT_ACCEPTANCE_STRICT is set.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "optocat/analysis.hpp"
#include "optocat/evolve.hpp"
#include "optocat/meanfield.hpp"
#include "optocat/model.hpp"
#include "optocat/oracle.hpp"
#include "optocat/scenario.hpp"

using namespace optocat;
namespace sc = optocat::scenario;

namespace {

const std::filesystem::path kConfigs = OPTOCAT_CONFIG_DIR;

struct Outcome {
    int id;
    bool pass;
    std::string detail;
};

std::vector<Outcome> outcomes;
std::vector<std::pair<std::string, const EvolveResult*>> all_runs;

void report(int id, bool pass, const std::string& detail) {
    outcomes.push_back({id, pass, detail});
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << id << ": " << detail << std::endl;
}

std::string fmt(double v, int prec = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

sc::ScenarioResult run_config(const std::string& name, std::map<std::string, sc::WarningTally>* warnings = nullptr) {
    const auto start = std::chrono::steady_clock::now();
    const auto cfg = sc::load_config(kConfigs / name);
    auto res = sc::execute(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "  ran " << name << " (" << res.runs.size() << " runs, " << fmt(secs, 3) << " s)" << std::endl;
    if (warnings) *warnings = res.warnings;
    return res;
}

DensityMatrix mech_state(const EvolveResult& r) {
    return r.final_state.is_composite() ? partial_trace_cavity(r.final_state) : r.final_state;
}

void keep(const std::string& label, const sc::ScenarioResult& res) {
    for (const auto& r : res.runs) all_runs.push_back({label + "/" + r.spec.label, &r.evolve});
}

// ------------------------------------------------------------ 1, 2, 7(c)

void fig4_checks(const sc::ScenarioResult& fig4) {
    const auto& first = fig4.runs.front();
    const DensityMatrix rho_b = mech_state(first.evolve);
    const double P00 = rho_b.matrix()(0, 0).real();
    const double P11 = rho_b.matrix()(1, 1).real();
    const double P01 = std::abs(rho_b.matrix()(0, 1));
    const double rhs_max = first.evolve.series.channel("rhs_max").back();

    std::vector<double> p01s;
    std::string sweep;
    for (const auto& r : fig4.runs) {
        p01s.push_back(std::abs(mech_state(r.evolve).matrix()(0, 1)));
        sweep += " g=" + fmt(r.spec.params.g) + ":" + fmt(p01s.back(), 4);
    }
    bool monotone = true;
    for (size_t i = 1; i < p01s.size(); ++i) monotone = monotone && p01s[i] <= p01s[i - 1];
    const bool steady = first.evolve.steady && rhs_max < 1e-9;
    const bool c1 = std::abs(first.spec.params.g - 0.1) < 1e-15 && steady && std::abs(P00 - 0.5) <= 0.01 &&
                    std::abs(P11 - 0.5) <= 0.01 && std::abs(P01 - 0.42) <= 0.02 && monotone;
    report(1, c1,
           "fig4 g=0.1 steady (max|rhs|=" + fmt(rhs_max, 3) + " at t=" + fmt(first.evolve.t_final) + "): P00=" +
               fmt(P00, 5) + " P11=" + fmt(P11, 5) + " |P01|=" + fmt(P01, 5) + "; |P01| sweep" + sweep +
               (monotone ? " (non-increasing)" : " (NOT monotone)"));

    const auto pred = oracle::mixed_steady_predict(first.spec.initial.beta0_abs);
    const double d00 = std::abs(P00 - pred.P00), d11 = std::abs(P11 - pred.P11),
                 d01 = std::abs(P01 - std::abs(pred.P01));
    report(2, d00 <= 0.02 && d11 <= 0.02 && d01 <= 0.02,
           "closed form P00=" + fmt(pred.P00, 5) + " P11=" + fmt(pred.P11, 5) + " |P01|=" + fmt(std::abs(pred.P01), 5) +
               "; deviations " + fmt(d00, 3) + ", " + fmt(d11, 3) + ", " + fmt(d01, 3));
}

// ------------------------------------------------------------ 3, 5

void fig3_checks(const sc::ScenarioResult& fig3) {
    const auto& run = fig3.runs.front();
    const auto& s = run.evolve.series;
    const auto& t = s.times();
    const auto& pur = s.channel("purity");
    const auto& fid = s.channel("fidelity");
    double worst_pur = 0.0, worst_fid = 0.0;  // most negative step after the transient
    for (size_t i = 1; i < t.size(); ++i) {
        if (t[i - 1] < 50.0) continue;
        worst_pur = std::min(worst_pur, pur[i] - pur[i - 1]);
        worst_fid = std::min(worst_fid, fid[i] - fid[i - 1]);
    }
    constexpr double kRoundoff = 1e-12;  // both channels sit at 1 to machine precision late in the run
    const bool setup = run.spec.params.N_a == 5 && run.spec.params.N_b == 40 &&
                       std::abs(run.spec.params.g - 0.1) < 1e-15 && std::abs(run.evolve.t_final - 2000.0) < 1e-9;
    const bool c3 = setup && pur.back() >= 0.98 && fid.back() >= 0.98 && worst_pur >= -kRoundoff && worst_fid >= -kRoundoff;
    report(3, c3,
           "fig3 g=0.1 at t=" + fmt(run.evolve.t_final) + ": P_b=" + fmt(pur.back(), 8) + " F0=" + fmt(fid.back(), 8) +
               "; largest decrease after t=50: P_b " + fmt(worst_pur, 3) + ", F0 " + fmt(worst_fid, 3) + " (roundoff allowance 1e-12) over " +
               std::to_string(t.size()) + " samples");

    const auto& par = s.channel("parity");
    double drift = 0.0;
    for (double p : par) drift = std::max(drift, std::abs(p - par.front()));
    report(5, drift < 1e-6, "max |<Pi_b>(t) - <Pi_b>(0)| over the fig3 run = " + fmt(drift, 3));
}

// ------------------------------------------------------------ 4

void dark_state_check() {
    bool pass = true;
    std::string detail;
    for (double E0 : {-1.0, -5.0}) {
        SystemParams p;
        p.g = 0.1;
        p.E2 = -E0 * p.g;
        p.N_a = 3;
        p.N_b = 60;
        const auto psi_b = oracle::dark_state_recursion(E0, oracle::Parity::even, ModeDim(p.N_b));
        const auto rho = DensityMatrix::product(DensityMatrix::pure(fock_state(0, ModeDim(p.N_a))),
                                                DensityMatrix::pure(psi_b));
        const double norm = lindblad_rhs(rho, p).cwiseAbs().maxCoeff();
        pass = pass && norm < 1e-8 * p.kappa;
        detail += " E0=" + fmt(E0) + ": " + fmt(norm, 3);
    }
    report(4, pass, "max|lindblad_rhs(dark projector)| at N_b=60:" + detail);
}

// ------------------------------------------------------------ 6

void adiabatic_check(const sc::ScenarioResult& full, const sc::ScenarioResult& reduced) {
    const auto& rf = full.runs.front();
    const auto& rr = reduced.runs.front();
    const double g2 = rf.spec.params.gamma2();
    const double t_hi = 10.0 / g2;
    // Re-run both with the full trajectories sampled on the same grid.
    const auto& tf = rf.evolve.series.times();
    const auto& tr = rr.evolve.series.times();
    const bool same_grid = tf == tr;

    // Trace distance needs states, not channels: step both integrations sample by sample.
    const SystemParams& p = rf.spec.params;
    EvolveConfig cfg = rf.spec.evolve;
    EvolveConfig cfg_r = rr.spec.evolve;
    cfg.record_every = cfg_r.record_every = std::numeric_limits<int>::max();
    const double interval = rf.spec.evolve.dt * rf.spec.evolve.record_every;
    DensityMatrix rho_full = sc::initial_density(rf.spec);
    DensityMatrix rho_red = sc::initial_density(rr.spec);
    double worst = 0.0, worst_t = 0.0;
    int samples = 0;
    for (double t = interval; t <= t_hi + 1e-9; t += interval) {
        cfg.t_end = cfg_r.t_end = interval;
        rho_full = integrate_master(rho_full, p, cfg, ModelKind::full).final_state;
        rho_red = integrate_master(rho_red, rr.spec.params, cfg_r, ModelKind::reduced).final_state;
        if (t < 20.0 - 1e-9) continue;
        const double d = trace_distance(partial_trace_cavity(rho_full), rho_red);
        ++samples;
        if (d > worst) {
            worst = d;
            worst_t = t;
        }
    }
    const bool setup = std::abs(p.g - 0.05) < 1e-15 && p.E2 == Complex(0.0) && p.gamma_m == 0.0 &&
                       std::abs(rf.spec.initial.beta0_abs - 1.0) < 1e-15;
    report(6, setup && samples > 0 && worst < 0.05,
           "max trace distance full vs reduced over t in [20, " + fmt(t_hi) + "] (" + std::to_string(samples) +
               " samples every " + fmt(interval) + ") = " + fmt(worst, 4) + " at t=" + fmt(worst_t) +
               (same_grid ? "" : " (scenario sample grids differ)"));
}

// ------------------------------------------------------------ 7

void wigner_check(const sc::ScenarioResult& fig4) {
    const Complex beta(0.0, std::sqrt(5.0));
    const auto cat = DensityMatrix::pure(oracle::even_cat(beta, ModeDim(40)));
    WignerResult res;
    {
        ScopedWarningHandler quiet([](const std::string&) {});
        res = wigner_grid_and_negativity(cat);
    }
    double worst = 0.0;
    for (int r = 0; r < res.grid.rows; ++r) {
        for (int c = 0; c < res.grid.cols; ++c) {
            const double ref = oracle::cat_wigner_closed_form(beta, oracle::Parity::even, res.grid.point(r, c));
            worst = std::max(worst, std::abs(res.grid.at(r, c) - ref));
        }
    }
    const DensityMatrix rho_b = mech_state(fig4.runs.front().evolve);
    const double w0 = wigner_point(rho_b, 0.0);
    const double expected = 2.0 / std::numbers::pi * (rho_b.matrix()(0, 0).real() - rho_b.matrix()(1, 1).real());
    const bool pass = worst < 1e-6 && res.riemann_sum >= 0.99 && res.riemann_sum <= 1.01 &&
                      std::abs(w0 - expected) < 1e-6;
    report(7, pass,
           "even cat i*sqrt5 on " + std::to_string(res.grid.rows) + "x" + std::to_string(res.grid.cols) +
               " grid: max deviation " + fmt(worst, 3) + ", Riemann sum " + fmt(res.riemann_sum, 6) +
               "; fig4 steady W(0)=" + fmt(w0, 8) + " vs (2/pi)(P00-P11)=" + fmt(expected, 8));
}

// ------------------------------------------------------------ 8

void fig5_check(const sc::ScenarioResult& fig5) {
    struct Row {
        std::string init;
        double n_th;
        double peak;   // most negative W_min for t < 100
        double final;  // W_min at t = 5/gamma_m
        double t_final;
    };
    std::vector<Row> rows;
    for (const auto& r : fig5.runs) {
        const auto& t = r.evolve.series.times();
        const auto& w = r.evolve.series.channel("wigner_min");
        double peak = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < t.size(); ++i) {
            if (t[i] < 100.0) peak = std::min(peak, w[i]);
        }
        rows.push_back({r.spec.initial.kind == sc::InitialKind::vacuum ? "vacuum" : "coherent", r.spec.params.n_th,
                        peak, w.back(), r.evolve.t_final});
    }
    bool pass = true;
    std::string detail;
    const double gamma_m = fig5.runs.front().spec.params.gamma_m;
    for (const auto& row : rows) {
        const double neg_peak = std::max(0.0, -row.peak);
        const double neg_final = std::max(0.0, -row.final);
        const bool decayed = std::abs(row.t_final - 5.0 / gamma_m) < 1e-6 && neg_final < 0.2 * neg_peak;
        pass = pass && decayed;
        detail += " [" + row.init + " n_th=" + fmt(row.n_th) + ": short-time min W " + fmt(row.peak, 4) +
                  ", at t=" + fmt(row.t_final) + " " + fmt(row.final, 3) + (decayed ? "" : " NOT decayed") + "]";
    }
    for (const char* init : {"vacuum", "coherent"}) {
        const Row* lo = nullptr;
        const Row* hi = nullptr;
        for (const auto& row : rows) {
            if (row.init != init) continue;
            if (!lo || row.n_th < lo->n_th) lo = &row;
            if (!hi || row.n_th > hi->n_th) hi = &row;
        }
        if (lo && hi && lo != hi) {
            const bool weaker = hi->peak > lo->peak;
            pass = pass && weaker;
            detail += std::string(" ") + init + (weaker ? ": larger n_th weaker" : ": larger n_th NOT weaker") + ";";
        }
        if (lo && std::string(init) == "vacuum") {
            const bool negative = lo->peak < -0.1;
            pass = pass && negative;
            detail += std::string(" vacuum n_th=") + fmt(lo->n_th) + " reaches " + fmt(lo->peak, 4) +
                      (negative ? " < -0.1;" : " (threshold -0.1 missed);");
        }
    }
    report(8, pass, "gamma_m=" + fmt(gamma_m) + detail);
}

// ------------------------------------------------------------ 9

void meanfield_check() {
    using namespace optocat::meanfield;
    MeanFieldParams p;
    p.kappa_c = 1.0;
    p.omega_m = 1.0;
    p.delta_c = 0.7;
    p.E1 = Complex(0.6, 0.3);
    const auto traj = integrate_classical({}, p, 20.0, 0.01, 100);
    const Complex alpha_s = p.E1 / Complex(-p.delta_c, p.kappa_c);
    const double rel = std::abs(traj.back().alpha - alpha_s) / std::abs(alpha_s);
    const double rel_formula = std::abs(steady_cavity_amplitude(p, 0.0) - alpha_s) / std::abs(alpha_s);

    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        MeanFieldParams q;
        q.g0 = u(rng);
        q.omega_m = std::abs(u(rng)) + 1e-3;
        q.gamma_m = std::abs(u(rng));
        q.kappa_c = std::abs(u(rng)) + 1e-3;
        q.delta_c = u(rng);
        worst = std::max(worst, steady_beta_residual(q, Complex(u(rng), u(rng)), 0.0));
    }
    report(9, rel < 1e-4 && rel_formula < 1e-12 && worst == 0.0,
           "linear ODE alpha(t=20) vs E1/(i kappa_c - Delta_c): rel error " + fmt(rel, 3) +
               "; steady_beta_residual(beta_s=0) max over 100 draws = " + fmt(worst));
}

// ------------------------------------------------------------ 10

void hygiene_check(const sc::ScenarioResult& coarse, const sc::ScenarioResult& fine) {
    double drift = 0.0, herm = 0.0, tail = 0.0, tail_mech = 0.0, tail_cav = 0.0;
    std::string worst_tail_run;
    for (const auto& [label, r] : all_runs) {
        drift = std::max(drift, r->max_trace_drift);
        herm = std::max(herm, r->max_hermiticity);
        tail_mech = std::max(tail_mech, r->max_tail_mech);
        tail_cav = std::max(tail_cav, r->max_tail_cavity);
        const double t = r->max_tail_mech + r->max_tail_cavity;
        if (t > tail) {
            tail = t;
            worst_tail_run = label;
        }
    }
    const auto& a = coarse.runs.front().evolve.series;
    const auto& b = fine.runs.front().evolve.series;
    double change = 0.0;
    std::string worst_channel;
    size_t compared = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        const auto it = std::find(b.times().begin(), b.times().end(), a.times()[i]);
        if (it == b.times().end()) continue;
        const size_t j = static_cast<size_t>(it - b.times().begin());
        ++compared;
        for (size_t c = 0; c < a.names().size(); ++c) {
            if (a.names()[c] == "rhs_max") continue;  // a derivative, not a state observable
            const double d = std::abs(a.column(c)[i] - b.column(c)[j]);
            if (d > change) {
                change = d;
                worst_channel = a.names()[c];
            }
        }
    }
    const bool pass = drift < 1e-8 && herm < 1e-10 && tail < 1e-5 && compared > 1 && change < 1e-6;
    report(10, pass,
           std::to_string(all_runs.size()) + " runs: max trace drift " + fmt(drift, 3) + ", max Hermiticity drift " +
               fmt(herm, 3) + ", max tail mass " + fmt(tail, 3) + " (" + worst_tail_run + "; mechanical " +
               fmt(tail_mech, 3) + ", cavity " + fmt(tail_cav, 3) + "); step halving dt=" +
               fmt(coarse.runs.front().spec.evolve.dt) + " vs " + fmt(fine.runs.front().spec.evolve.dt) +
               ": max channel change " + fmt(change, 3) + " (" + worst_channel + ", " + std::to_string(compared) +
               " common samples)");
}

}  // namespace

int main() {
    std::cout << "acceptance: configs from " << kConfigs.string() << std::endl;
    std::map<std::string, sc::WarningTally> warnings;

    dark_state_check();
    meanfield_check();

    const auto fig4 = run_config("fig4.cfg");
    keep("fig4", fig4);
    fig4_checks(fig4);
    wigner_check(fig4);

    const auto fig3 = run_config("fig3_g0.1.cfg");
    keep("fig3", fig3);
    fig3_checks(fig3);

    const auto full = run_config("adiabatic_full.cfg");
    const auto reduced = run_config("adiabatic_reduced.cfg");
    keep("adiabatic_full", full);
    keep("adiabatic_reduced", reduced);
    adiabatic_check(full, reduced);

    const auto fig5 = run_config("fig5.cfg", &warnings);
    keep("fig5", fig5);
    fig5_check(fig5);
    for (const auto& [kind, tally] : warnings) {
        std::cout << "  fig5 warning (" << tally.count << "x): " << tally.last << std::endl;
    }

    auto halfstep_cfg = sc::load_config(kConfigs / "fig4_stephalving.cfg");
    const auto coarse = sc::execute(halfstep_cfg);
    halfstep_cfg.dt *= 0.5;
    halfstep_cfg.record_interval = coarse.runs.front().spec.evolve.dt * coarse.runs.front().spec.evolve.record_every;
    const auto fine = sc::execute(halfstep_cfg);
    keep("stephalving_dt", coarse);
    keep("stephalving_dt/2", fine);
    hygiene_check(coarse, fine);

    std::sort(outcomes.begin(), outcomes.end(), [](const Outcome& x, const Outcome& y) { return x.id < y.id; });
    int failed = 0;
    std::cout << "\nsummary:" << std::endl;
    for (const auto& o : outcomes) {
        std::cout << "  criterion " << o.id << ": " << (o.pass ? "PASS" : "FAIL") << std::endl;
        failed += o.pass ? 0 : 1;
    }
    std::cout << outcomes.size() - failed << "/" << outcomes.size() << " criteria pass" << std::endl;
    std::ofstream report("acceptance_report.txt");
    for (const auto& o : outcomes) {
        report << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << o.id << ": " << o.detail << '\n';
    }
    const char* strict = std::getenv("OPTOCAT_ACCEPTANCE_STRICT");
    return (strict && *strict && failed > 0) ? 1 : 0;
}
