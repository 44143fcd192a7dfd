#pragma once

// Fixed-step RK4 integration of the full or reduced master equation with
// conservation monitoring and observable recording.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

#include "optocat/analysis.hpp"
#include "optocat/errors.hpp"
#include "optocat/fock.hpp"
#include "optocat/model.hpp"

namespace optocat {

enum class Renorm { off, monitor };

struct EvolveConfig {
    double dt = 0.01;      // 1/kappa
    double t_end = 1.0;    // 1/kappa; 0 records the initial state only
    int record_every = 100;
    Renorm renorm = Renorm::off;
    bool stop_at_steady = false;
    double steady_tol = 1e-9;  // max |rhs| that counts as stationary

    void validate() const {
        if (!(dt > 0.0)) throw InvalidArgument("dt must be > 0");
        if (!(t_end == 0.0 || t_end >= dt)) throw InvalidArgument("t_end must be 0 or >= dt");
        if (record_every < 1) throw InvalidArgument("record_every must be >= 1");
        if (!(steady_tol > 0.0)) throw InvalidArgument("steady_tol must be > 0");
    }
};

/// What to measure at each record point besides the always-on channels.
struct Observers {
    std::optional<StateVector> fidelity_target;
    std::optional<GridSpec> wigner;  // adds wigner_min
    bool min_eigenvalue = false;
};

/// Sampled channels sharing one time axis.
class TimeSeries {
public:
    void add_channel(std::string name) {
        names_.push_back(std::move(name));
        columns_.emplace_back(times_.size(), std::numeric_limits<double>::quiet_NaN());
    }

    /// Appends one sample; `row` holds one value per channel in channel order.
    void append(double t, const std::vector<double>& row) {
        if (row.size() != columns_.size()) {
            throw DimensionMismatch("TimeSeries row has " + std::to_string(row.size()) + " values for " +
                                    std::to_string(columns_.size()) + " channels");
        }
        times_.push_back(t);
        for (size_t c = 0; c < row.size(); ++c) columns_[c].push_back(row[c]);
    }

    size_t size() const noexcept { return times_.size(); }
    bool empty() const noexcept { return times_.empty(); }
    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<std::string>& names() const noexcept { return names_; }

    bool has(const std::string& name) const { return index_of(name).has_value(); }

    const std::vector<double>& channel(const std::string& name) const {
        const auto idx = index_of(name);
        if (!idx) throw InvalidArgument("no channel named '" + name + "'");
        return columns_[*idx];
    }

    const std::vector<double>& column(size_t i) const { return columns_.at(i); }

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

private:
    std::optional<size_t> index_of(const std::string& name) const {
        for (size_t i = 0; i < names_.size(); ++i) {
            if (names_[i] == name) return i;
        }
        return std::nullopt;
    }

    std::vector<double> times_;
    std::vector<std::string> names_;
    std::vector<std::vector<double>> columns_;
};

/// Generators are either objects with `apply(in, out)` or callables returning the derivative.
template <class G>
concept InPlaceGenerator = requires(const G& g, const OperatorMatrix& in, OperatorMatrix& out) { g.apply(in, out); };

template <class G>
concept Generator =
    InPlaceGenerator<G> || requires(const G& g, const OperatorMatrix& in) {
        { g(in) } -> std::convertible_to<OperatorMatrix>;
    };

template <Generator G>
void evaluate(const G& gen, const OperatorMatrix& in, OperatorMatrix& out) {
    if constexpr (InPlaceGenerator<G>) {
        gen.apply(in, out);
    } else {
        out = gen(in);
    }
}

struct Rk4Workspace {
    OperatorMatrix k1, k2, k3, k4, stage;
};

/// Symmetrizes rho in place: (rho + rho^dagger) / 2.
inline void hermitize(OperatorMatrix& rho) {
    const Eigen::Index n = rho.rows();
    for (Eigen::Index j = 0; j < n; ++j) {
        rho(j, j) = rho(j, j).real();
        for (Eigen::Index i = 0; i < j; ++i) {
            const Complex v = 0.5 * (rho(i, j) + std::conj(rho(j, i)));
            rho(i, j) = v;
            rho(j, i) = std::conj(v);
        }
    }
}

/// One RK4 step in place. Expects ws.k1 to already hold gen(rho).
template <Generator G>
void rk4_step_inplace(OperatorMatrix& rho, const G& gen, double dt, Rk4Workspace& ws) {
    ws.stage = rho + (0.5 * dt) * ws.k1;
    evaluate(gen, ws.stage, ws.k2);
    ws.stage = rho + (0.5 * dt) * ws.k2;
    evaluate(gen, ws.stage, ws.k3);
    ws.stage = rho + dt * ws.k3;
    evaluate(gen, ws.stage, ws.k4);
    rho += (dt / 6.0) * (ws.k1 + 2.0 * ws.k2 + 2.0 * ws.k3 + ws.k4);
    hermitize(rho);
}

template <Generator G>
DensityMatrix rk4_step(const DensityMatrix& rho, const G& gen, double dt) {
    Rk4Workspace ws;
    OperatorMatrix m = rho.matrix();
    evaluate(gen, m, ws.k1);
    rk4_step_inplace(m, gen, dt, ws);
    return DensityMatrix::unchecked(std::move(m), rho.cavity_dim(), rho.mech_dim());
}

struct EvolveResult {
    TimeSeries series;
    DensityMatrix final_state;
    double t_final = 0.0;
    long long steps = 0;
    bool steady = false;  // stopped because max |rhs| < steady_tol
    double max_trace_drift = 0.0;
    double max_hermiticity = 0.0;
    double max_tail_mech = 0.0;
    double max_tail_cavity = 0.0;
    double min_eigenvalue = std::numeric_limits<double>::infinity();  // when monitored
};

namespace detail {

/// Flushes subnormals to zero on this thread while alive. Decayed matrix elements
/// otherwise drift into the subnormal range and stall the arithmetic.
class FlushSubnormals {
public:
#if defined(__SSE2__)
    FlushSubnormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }  // FTZ | DAZ
    ~FlushSubnormals() { _mm_setcsr(saved_); }

private:
    unsigned saved_;

public:
#else
    FlushSubnormals() = default;
#endif
    FlushSubnormals(const FlushSubnormals&) = delete;
    FlushSubnormals& operator=(const FlushSubnormals&) = delete;
};

class Recorder {
public:
    Recorder(ModelKind kind, const Observers& obs) : kind_(kind), obs_(obs) {
        for (const char* name : {"trace_error", "hermiticity", "tail_mech", "tail_cavity", "rhs_max", "purity",
                                 "parity", "p_even", "p_odd", "p01_re", "p01_im", "p01_abs", "leakage"}) {
            series.add_channel(name);
        }
        if (obs_.fidelity_target) series.add_channel("fidelity");
        if (obs_.wigner) {
            series.add_channel("wigner_min");
            series.add_channel("wigner_negativity");  // |min(W, 0)|
        }
        if (obs_.min_eigenvalue) series.add_channel("min_eig");
    }

    void record(double t, const DensityMatrix& rho, double rhs_max, EvolveResult& res) {
        const DensityMatrix rho_b = kind_ == ModelKind::full ? partial_trace_cavity(rho) : rho;
        const TailMasses tails = mode_tail_masses(rho);
        const ParityPopulations par = parity_populations(rho_b);
        const ZeroOneCoherence coh = zero_one_coherence(rho_b);
        const double trace_err = std::abs(rho.matrix().trace() - 1.0);
        const double herm = (rho.matrix() - rho.matrix().adjoint()).cwiseAbs().maxCoeff();
        std::vector<double> row{trace_err,
                                herm,
                                tails.mech,
                                tails.cavity,
                                rhs_max,
                                purity(rho_b),
                                par.even - par.odd,
                                par.even,
                                par.odd,
                                coh.p01.real(),
                                coh.p01.imag(),
                                std::abs(coh.p01),
                                coh.leakage};
        if (obs_.fidelity_target) row.push_back(fidelity_pure(rho_b, *obs_.fidelity_target));
        if (obs_.wigner) {
            const double w_min = wigner_grid_and_negativity(rho_b, *obs_.wigner).w_min;
            row.push_back(w_min);
            row.push_back(std::max(0.0, -w_min));
        }
        if (obs_.min_eigenvalue) {
            const double lam = min_eigenvalue(rho_b);
            res.min_eigenvalue = std::min(res.min_eigenvalue, lam);
            row.push_back(lam);
        }
        res.max_hermiticity = std::max(res.max_hermiticity, herm);
        series.append(t, row);
    }

    TimeSeries series;

private:
    ModelKind kind_;
    const Observers& obs_;
};

}  // namespace detail

inline constexpr double kTailAbort = 1e-5;
inline constexpr double kTraceAbort = 1e-6;

/// Integrates rho0 under the full (composite rho0) or reduced (single-mode rho0) master equation.
/// Aborts with NumericalAbort when the mechanical tail mass exceeds 1e-5, when the trace drifts
/// beyond 1e-6 (renorm = off) or when the state stops being finite.
inline EvolveResult integrate_master(const DensityMatrix& rho0, const SystemParams& p, const EvolveConfig& cfg,
                                     ModelKind kind, const Observers& obs = {}) {
    p.validate();
    cfg.validate();
    const detail::FlushSubnormals flush;
    if (kind == ModelKind::full) {
        if (!rho0.is_composite() || rho0.cavity_dim() != p.N_a || rho0.mech_dim() != p.N_b) {
            throw DimensionMismatch("full model needs a composite initial state of dims (" + std::to_string(p.N_a) +
                                    ", " + std::to_string(p.N_b) + ")");
        }
    } else if (rho0.is_composite() || rho0.mech_dim() != p.N_b) {
        throw DimensionMismatch("reduced model needs a single-mode initial state of dim " + std::to_string(p.N_b));
    }
    const double lambda = stiffness(p, kind);
    if (cfg.dt * lambda > 0.1 * (1.0 + 1e-12)) {
        throw InvalidArgument("step too large: dt * Lambda = " + std::to_string(cfg.dt * lambda) +
                              " > 0.1 (Lambda = " + std::to_string(lambda) + ")");
    }
    if (obs.fidelity_target && obs.fidelity_target->dim() != p.N_b) {
        throw DimensionMismatch("fidelity target must live on the mechanical space");
    }

    struct ModelGenerator {
        std::optional<FullLiouvillian> full;
        std::optional<ReducedLiouvillian> reduced;
        void apply(const OperatorMatrix& in, OperatorMatrix& out) const {
            if (full) {
                full->apply(in, out);
            } else {
                reduced->apply(in, out);
            }
        }
    } rhs;
    if (kind == ModelKind::full) {
        rhs.full.emplace(p);
    } else {
        rhs.reduced.emplace(p);
    }

    const int na = rho0.cavity_dim(), nb = rho0.mech_dim();
    EvolveResult res{{}, rho0};
    detail::Recorder rec(kind, obs);
    Rk4Workspace ws;
    OperatorMatrix rho = rho0.matrix();
    const long long steps = cfg.t_end == 0.0 ? 0 : std::llround(cfg.t_end / cfg.dt);

    auto tails_of = [&](const OperatorMatrix& m) {
        return mode_tail_masses(DensityMatrix::unchecked(m, na, nb));
    };
    auto monitor = [&](const OperatorMatrix& m, double t) {
        const double drift = std::abs(m.trace() - 1.0);
        if (!std::isfinite(drift)) {
            throw NumericalAbort("state became non-finite", t);
        }
        res.max_trace_drift = std::max(res.max_trace_drift, drift);
        if (cfg.renorm == Renorm::off && drift > kTraceAbort) {
            throw NumericalAbort("trace drift " + std::to_string(drift) + " exceeds " + std::to_string(kTraceAbort),
                                 t);
        }
        const TailMasses tails = tails_of(m);
        res.max_tail_mech = std::max(res.max_tail_mech, tails.mech);
        res.max_tail_cavity = std::max(res.max_tail_cavity, tails.cavity);
        if (tails.mech > kTailAbort) {
            throw NumericalAbort("mechanical tail mass " + std::to_string(tails.mech) + " exceeds " +
                                 std::to_string(kTailAbort) + "; increase N_b",
                                 t);
        }
    };

    monitor(rho, 0.0);
    long long n = 0;
    double t = 0.0;
    for (;; ++n) {
        t = n * cfg.dt;
        rhs.apply(rho, ws.k1);
        const double rhs_max = ws.k1.cwiseAbs().maxCoeff();
        const bool steady = cfg.stop_at_steady && rhs_max < cfg.steady_tol;
        const bool last = n == steps || steady;
        if (n % cfg.record_every == 0 || last) {
            rec.record(t, DensityMatrix::unchecked(rho, na, nb), rhs_max, res);
        }
        if (last) {
            res.steady = steady;
            break;
        }
        rk4_step_inplace(rho, rhs, cfg.dt, ws);
        monitor(rho, (n + 1) * cfg.dt);
    }

    res.series = std::move(rec.series);
    res.final_state = DensityMatrix::unchecked(std::move(rho), na, nb);
    res.t_final = t;
    res.steps = n;
    return res;
}

}  // namespace optocat
