#pragma once

// Scenario configs: a flat `key = value` text format, expansion into
// individual integrations (one per sweep entry), execution and output.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "optocat/analysis.hpp"
#include "optocat/errors.hpp"
#include "optocat/evolve.hpp"
#include "optocat/fock.hpp"
#include "optocat/io.hpp"
#include "optocat/model.hpp"
#include "optocat/oracle.hpp"

namespace optocat::scenario {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputDirEnv = "OPTOCAT_OUTPUT_DIR";

enum class Kind { fig3, fig4, fig5, custom };
enum class InitialKind { vacuum, fock, coherent };

inline const char* to_string(Kind k) {
    switch (k) {
        case Kind::fig3: return "fig3";
        case Kind::fig4: return "fig4";
        case Kind::fig5: return "fig5";
        case Kind::custom: return "custom";
    }
    return "?";
}

inline const char* to_string(InitialKind k) {
    switch (k) {
        case InitialKind::vacuum: return "vacuum";
        case InitialKind::fock: return "fock";
        case InitialKind::coherent: return "coherent";
    }
    return "?";
}

struct InitialState {
    InitialKind kind = InitialKind::vacuum;
    int n = 0;  // fock
    double beta0_abs = 1.7;
    double theta0 = 0.0;

    friend bool operator==(const InitialState&, const InitialState&) = default;
};

struct ScenarioConfig {
    Kind scenario = Kind::custom;
    double g = 0.1;
    double kappa = 1.0;
    std::optional<Complex> E2;  // absolute drive; when unset E2 = E2_per_g * g
    Complex E2_per_g = 0.0;
    double gamma_m = 0.0;
    double n_th = 0.0;
    int N_a = 3;
    int N_b = 25;
    ModelKind model = ModelKind::full;
    InitialState initial;
    double dt = 0.0;  // 0 picks 1/ceil(10 Lambda)
    double t_end = 100.0;
    double record_interval = 1.0;
    Renorm renorm = Renorm::off;
    bool stop_at_steady = false;
    double steady_tol = 1e-9;
    GridSpec grid;
    bool wigner_series = false;
    bool fidelity = true;  // fidelity to the dark-state cat when one exists
    std::string sweep_param = "none";
    std::vector<double> sweep_values;
    std::string output_dir;
    unsigned threads = 1;  // 0 uses every hardware thread

    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

inline const std::vector<std::string>& sweep_parameters() {
    static const std::vector<std::string> names{"none",    "g",         "kappa",  "n_th",
                                                "gamma_m", "E2_per_g", "beta0_abs", "theta0"};
    return names;
}

inline ScenarioConfig defaults(Kind kind) {
    ScenarioConfig c;
    c.scenario = kind;
    c.output_dir = std::string("out/") + to_string(kind);
    switch (kind) {
        case Kind::fig3:
            c.E2_per_g = 5.0;
            c.N_a = 5;
            c.N_b = 40;
            c.t_end = 2000.0;
            c.sweep_param = "g";
            c.sweep_values = {0.1, 0.2, 0.5};
            break;
        case Kind::fig4:
            c.initial = {InitialKind::coherent, 0, 1.7, 0.0};
            c.t_end = 4000.0;
            c.record_interval = 10.0;
            c.stop_at_steady = true;
            c.sweep_param = "g";
            c.sweep_values = {0.1, 0.3, 0.5, 1.0};
            break;
        case Kind::fig5:
            c.gamma_m = 1e-3;
            c.t_end = 5000.0;
            c.record_interval = 5.0;
            c.wigner_series = true;
            c.sweep_param = "n_th";
            c.sweep_values = {0.0, 5.0};
            break;
        case Kind::custom:
            break;
    }
    return c;
}

// ---------------------------------------------------------------- text format

namespace detail {

struct KeyError {
    std::string key;
    std::string message;
};

[[noreturn]] inline void bad(std::string key, std::string message) { throw KeyError{std::move(key), std::move(message)}; }

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline double real_value(std::string_view key, std::string_view v) {
    const auto d = io::parse_double(v);
    if (!d) bad(std::string(key), "expected a number, got '" + std::string(v) + "'");
    return *d;
}

inline int int_value(std::string_view key, std::string_view v) {
    const double d = real_value(key, v);
    if (d != std::floor(d) || std::abs(d) > 1e9) bad(std::string(key), "expected an integer, got '" + std::string(v) + "'");
    return static_cast<int>(d);
}

inline bool bool_value(std::string_view key, std::string_view v) {
    if (v == "true") return true;
    if (v == "false") return false;
    bad(std::string(key), "expected true or false, got '" + std::string(v) + "'");
}

/// `re`, `imj`, `re+imj` or `re-imj`.
inline Complex complex_value(std::string_view key, std::string_view v) {
    auto fail = [&]() -> Complex { bad(std::string(key), "expected a complex number re+imj, got '" + std::string(v) + "'"); };
    if (v.empty()) return fail();
    if (v.back() != 'j') return real_value(key, v);
    const std::string_view body = v.substr(0, v.size() - 1);
    size_t split = std::string_view::npos;
    for (size_t i = body.size(); i-- > 1;) {
        if ((body[i] == '+' || body[i] == '-') && body[i - 1] != 'e' && body[i - 1] != 'E') {
            split = i;
            break;
        }
    }
    if (split == std::string_view::npos) {
        const auto im = io::parse_double(body);
        return im ? Complex(0.0, *im) : fail();
    }
    const auto re = io::parse_double(body.substr(0, split));
    const auto im = io::parse_double(body.substr(split));
    return re && im ? Complex(*re, *im) : fail();
}

inline std::string format_complex(Complex z) {
    const std::string im = io::format_double(z.imag());
    return io::format_double(z.real()) + (im.front() == '-' ? "" : "+") + im + "j";
}

inline std::vector<double> list_value(std::string_view key, std::string_view v) {
    std::vector<double> out;
    if (trim(v).empty()) return out;
    for (auto tok : io::split(v, ',')) out.push_back(real_value(key, trim(tok)));
    return out;
}

inline std::string format_list(const std::vector<double>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i > 0) s += ", ";
        s += io::format_double(v[i]);
    }
    return s;
}

struct Field {
    const char* key;
    bool fixed_in_fig5;  // presets of the two fig5 initial conditions
    std::function<void(ScenarioConfig&, std::string_view)> set;
    std::function<std::optional<std::string>(const ScenarioConfig&)> get;
};

template <class T>
Field real_field(const char* key, T ScenarioConfig::*member, bool fixed = false) {
    return {key, fixed, [key, member](ScenarioConfig& c, std::string_view v) { c.*member = real_value(key, v); },
            [member](const ScenarioConfig& c) -> std::optional<std::string> { return io::format_double(c.*member); }};
}

inline Field grid_field(const char* key, double GridSpec::*member) {
    return {key, false, [key, member](ScenarioConfig& c, std::string_view v) { c.grid.*member = real_value(key, v); },
            [member](const ScenarioConfig& c) -> std::optional<std::string> { return io::format_double(c.grid.*member); }};
}

inline const std::vector<Field>& fields() {
    using S = std::optional<std::string>;
    static const std::vector<Field> table{
        real_field("g", &ScenarioConfig::g),
        real_field("kappa", &ScenarioConfig::kappa),
        {"E2", true, [](ScenarioConfig& c, std::string_view v) { c.E2 = complex_value("E2", v); },
         [](const ScenarioConfig& c) -> S { return c.E2 ? S(format_complex(*c.E2)) : std::nullopt; }},
        {"E2_per_g", true, [](ScenarioConfig& c, std::string_view v) { c.E2_per_g = complex_value("E2_per_g", v); },
         [](const ScenarioConfig& c) -> S { return c.E2 ? std::nullopt : S(format_complex(c.E2_per_g)); }},
        real_field("gamma_m", &ScenarioConfig::gamma_m),
        real_field("n_th", &ScenarioConfig::n_th),
        {"N_a", true, [](ScenarioConfig& c, std::string_view v) { c.N_a = int_value("N_a", v); },
         [](const ScenarioConfig& c) -> S { return std::to_string(c.N_a); }},
        {"N_b", true, [](ScenarioConfig& c, std::string_view v) { c.N_b = int_value("N_b", v); },
         [](const ScenarioConfig& c) -> S { return std::to_string(c.N_b); }},
        {"model", true,
         [](ScenarioConfig& c, std::string_view v) {
             if (v == "full") c.model = ModelKind::full;
             else if (v == "reduced") c.model = ModelKind::reduced;
             else bad("model", "expected full or reduced, got '" + std::string(v) + "'");
         },
         [](const ScenarioConfig& c) -> S { return c.model == ModelKind::full ? "full" : "reduced"; }},
        {"initial", true,
         [](ScenarioConfig& c, std::string_view v) {
             if (v == "vacuum") c.initial.kind = InitialKind::vacuum;
             else if (v == "fock") c.initial.kind = InitialKind::fock;
             else if (v == "coherent") c.initial.kind = InitialKind::coherent;
             else bad("initial", "expected vacuum, fock or coherent, got '" + std::string(v) + "'");
         },
         [](const ScenarioConfig& c) -> S { return to_string(c.initial.kind); }},
        {"initial_n", true, [](ScenarioConfig& c, std::string_view v) { c.initial.n = int_value("initial_n", v); },
         [](const ScenarioConfig& c) -> S { return std::to_string(c.initial.n); }},
        {"beta0_abs", false, [](ScenarioConfig& c, std::string_view v) { c.initial.beta0_abs = real_value("beta0_abs", v); },
         [](const ScenarioConfig& c) -> S { return io::format_double(c.initial.beta0_abs); }},
        {"theta0", false, [](ScenarioConfig& c, std::string_view v) { c.initial.theta0 = real_value("theta0", v); },
         [](const ScenarioConfig& c) -> S { return io::format_double(c.initial.theta0); }},
        real_field("dt", &ScenarioConfig::dt),
        real_field("t_end", &ScenarioConfig::t_end),
        real_field("record_interval", &ScenarioConfig::record_interval),
        {"renorm", false,
         [](ScenarioConfig& c, std::string_view v) {
             if (v == "off") c.renorm = Renorm::off;
             else if (v == "monitor") c.renorm = Renorm::monitor;
             else bad("renorm", "expected off or monitor, got '" + std::string(v) + "'");
         },
         [](const ScenarioConfig& c) -> S { return c.renorm == Renorm::off ? "off" : "monitor"; }},
        {"stop_at_steady", false,
         [](ScenarioConfig& c, std::string_view v) { c.stop_at_steady = bool_value("stop_at_steady", v); },
         [](const ScenarioConfig& c) -> S { return c.stop_at_steady ? "true" : "false"; }},
        real_field("steady_tol", &ScenarioConfig::steady_tol),
        grid_field("grid_re_min", &GridSpec::re_min),
        grid_field("grid_re_max", &GridSpec::re_max),
        grid_field("grid_im_min", &GridSpec::im_min),
        grid_field("grid_im_max", &GridSpec::im_max),
        grid_field("grid_step", &GridSpec::step),
        {"wigner_series", false,
         [](ScenarioConfig& c, std::string_view v) { c.wigner_series = bool_value("wigner_series", v); },
         [](const ScenarioConfig& c) -> S { return c.wigner_series ? "true" : "false"; }},
        {"fidelity", false,
         [](ScenarioConfig& c, std::string_view v) {
             if (v == "auto") c.fidelity = true;
             else if (v == "none") c.fidelity = false;
             else bad("fidelity", "expected auto or none, got '" + std::string(v) + "'");
         },
         [](const ScenarioConfig& c) -> S { return c.fidelity ? "auto" : "none"; }},
        {"sweep_param", false,
         [](ScenarioConfig& c, std::string_view v) {
             const auto& names = sweep_parameters();
             if (std::find(names.begin(), names.end(), v) == names.end()) {
                 bad("sweep_param", "cannot sweep '" + std::string(v) + "'");
             }
             c.sweep_param = std::string(v);
         },
         [](const ScenarioConfig& c) -> S { return c.sweep_param; }},
        {"sweep_values", false,
         [](ScenarioConfig& c, std::string_view v) { c.sweep_values = list_value("sweep_values", v); },
         [](const ScenarioConfig& c) -> S { return c.sweep_values.empty() ? std::nullopt : S(format_list(c.sweep_values)); }},
        {"output_dir", false, [](ScenarioConfig& c, std::string_view v) { c.output_dir = std::string(v); },
         [](const ScenarioConfig& c) -> S { return c.output_dir; }},
        {"threads", false,
         [](ScenarioConfig& c, std::string_view v) {
             const int t = int_value("threads", v);
             if (t < 0) bad("threads", "must be >= 0");
             c.threads = static_cast<unsigned>(t);
         },
         [](const ScenarioConfig& c) -> S { return std::to_string(c.threads); }},
    };
    return table;
}

inline const Field* find_field(std::string_view key) {
    for (const auto& f : fields()) {
        if (key == f.key) return &f;
    }
    return nullptr;
}

}  // namespace detail

// ---------------------------------------------------------------- expansion

/// One integration: a sweep entry, and for fig5 one of its two initial conditions.
struct RunSpec {
    std::string label;
    double sweep_value = std::numeric_limits<double>::quiet_NaN();
    SystemParams params;
    InitialState initial;
    ModelKind model = ModelKind::full;
    EvolveConfig evolve;
    GridSpec grid;
    bool wigner_series = false;
    bool fidelity = false;
};

namespace detail {

inline void apply_sweep(ScenarioConfig& c, const std::string& param, double v) {
    if (param == "g") c.g = v;
    else if (param == "kappa") c.kappa = v;
    else if (param == "n_th") c.n_th = v;
    else if (param == "gamma_m") c.gamma_m = v;
    else if (param == "E2_per_g") c.E2_per_g = v;
    else if (param == "beta0_abs") c.initial.beta0_abs = v;
    else if (param == "theta0") c.initial.theta0 = v;
}

/// The two initial conditions of fig5: the fig3 cat-forming setup and the fig4 coherent input.
inline std::vector<std::pair<std::string, ScenarioConfig>> fig5_presets(const ScenarioConfig& c) {
    ScenarioConfig vac = c;
    vac.E2.reset();
    vac.E2_per_g = 5.0;
    vac.N_a = 5;
    vac.N_b = 40;
    vac.model = ModelKind::full;
    vac.initial = {InitialKind::vacuum, 0, c.initial.beta0_abs, c.initial.theta0};
    ScenarioConfig coh = c;
    coh.E2.reset();
    coh.E2_per_g = 0.0;
    coh.N_a = 3;
    coh.N_b = 25;
    coh.model = ModelKind::full;
    coh.initial = {InitialKind::coherent, 0, c.initial.beta0_abs, c.initial.theta0};
    return {{"vacuum", vac}, {"coherent", coh}};
}

inline RunSpec make_run(const ScenarioConfig& c, std::string label, double sweep_value) {
    RunSpec r;
    r.label = std::move(label);
    r.sweep_value = sweep_value;
    r.params.g = c.g;
    r.params.kappa = c.kappa;
    r.params.E2 = c.E2 ? *c.E2 : c.E2_per_g * c.g;
    r.params.gamma_m = c.gamma_m;
    r.params.n_th = c.n_th;
    r.params.N_a = c.N_a;
    r.params.N_b = c.N_b;
    r.initial = c.initial;
    r.model = c.model;
    r.grid = c.grid;
    r.wigner_series = c.wigner_series;
    r.fidelity = c.fidelity && c.model == ModelKind::full && r.params.E2 != Complex(0.0) &&
                 c.initial.kind != InitialKind::coherent;
    r.evolve.dt = c.dt;
    if (c.dt == 0.0 && std::isfinite(c.kappa) && c.kappa > 0.0) {
        r.evolve.dt = 1.0 / std::ceil(10.0 * stiffness(r.params, c.model) - 1e-9);
    }
    r.evolve.t_end = c.t_end;
    r.evolve.record_every = std::max(1, static_cast<int>(std::lround(c.record_interval / r.evolve.dt)));
    r.evolve.renorm = c.renorm;
    r.evolve.stop_at_steady = c.stop_at_steady;
    r.evolve.steady_tol = c.steady_tol;
    return r;
}

inline std::string sweep_label(const std::string& param, double v) { return param + "_" + io::format_double(v); }

}  // namespace detail

/// Individual integrations of a config in output order. No validation.
inline std::vector<RunSpec> expand_runs(const ScenarioConfig& cfg) {
    std::vector<std::pair<std::string, ScenarioConfig>> bases;
    if (cfg.scenario == Kind::fig5) {
        bases = detail::fig5_presets(cfg);
    } else {
        bases = {{"", cfg}};
    }
    std::vector<RunSpec> runs;
    for (const auto& [prefix, base] : bases) {
        if (cfg.sweep_param == "none") {
            runs.push_back(detail::make_run(base, prefix.empty() ? "run" : prefix,
                                            std::numeric_limits<double>::quiet_NaN()));
            continue;
        }
        for (double v : cfg.sweep_values) {
            ScenarioConfig c = base;
            detail::apply_sweep(c, cfg.sweep_param, v);
            const std::string label = detail::sweep_label(cfg.sweep_param, v);
            runs.push_back(detail::make_run(c, prefix.empty() ? label : prefix + "_" + label, v));
        }
    }
    return runs;
}

/// Fidelity reference: the cat spanned by the dark state of the run's drive, with the parity of the input.
inline std::optional<StateVector> fidelity_target(const RunSpec& r) {
    if (!r.fidelity) return std::nullopt;
    const int n = r.initial.kind == InitialKind::fock ? r.initial.n : 0;
    const auto spec = oracle::CatSpec::from_drive(dark_state_eigenvalue(r.params),
                                                  n % 2 == 0 ? oracle::Parity::even : oracle::Parity::odd);
    return oracle::cat_state(spec, ModeDim(r.params.N_b));
}

inline DensityMatrix initial_density(const RunSpec& r) {
    const ModeDim db(r.params.N_b);
    StateVector mech = fock_state(0, db);
    if (r.initial.kind == InitialKind::fock) {
        mech = fock_state(r.initial.n, db);
    } else if (r.initial.kind == InitialKind::coherent) {
        mech = coherent_state(std::polar(r.initial.beta0_abs, r.initial.theta0), db);
    }
    if (r.model == ModelKind::reduced) return DensityMatrix::pure(mech);
    return DensityMatrix::product(DensityMatrix::pure(fock_state(0, ModeDim(r.params.N_a))), DensityMatrix::pure(mech));
}

// ---------------------------------------------------------------- validation

namespace detail {

inline void check_config(const ScenarioConfig& c) {
    if (!(c.g > 0.0) || !std::isfinite(c.g)) bad("g", "must be finite and > 0");
    if (!(c.kappa > 0.0) || !std::isfinite(c.kappa)) bad("kappa", "must be finite and > 0");
    if (!(c.gamma_m >= 0.0) || !std::isfinite(c.gamma_m)) bad("gamma_m", "must be finite and >= 0");
    if (!(c.n_th >= 0.0) || !std::isfinite(c.n_th)) bad("n_th", "must be finite and >= 0");
    if (c.N_a < 2) bad("N_a", "must be >= 2");
    if (c.N_b < 4) bad("N_b", "must be >= 4");
    if (c.initial.n < 0 || c.initial.n >= c.N_b) bad("initial_n", "must lie in [0, N_b)");
    if (!(c.initial.beta0_abs >= 0.0) || !std::isfinite(c.initial.beta0_abs)) bad("beta0_abs", "must be >= 0");
    if (!std::isfinite(c.initial.theta0)) bad("theta0", "must be finite");
    if (!(c.dt >= 0.0) || !std::isfinite(c.dt)) bad("dt", "must be >= 0 (0 selects the step automatically)");
    if (!(c.t_end >= 0.0) || !std::isfinite(c.t_end)) bad("t_end", "must be >= 0");
    if (!(c.record_interval > 0.0)) bad("record_interval", "must be > 0");
    if (!(c.steady_tol > 0.0)) bad("steady_tol", "must be > 0");
    if (!(c.grid.step > 0.0)) bad("grid_step", "must be > 0");
    if (!(c.grid.re_max >= c.grid.re_min)) bad("grid_re_max", "must be >= grid_re_min");
    if (!(c.grid.im_max >= c.grid.im_min)) bad("grid_im_max", "must be >= grid_im_min");
    if (c.grid.rows() * static_cast<double>(c.grid.cols()) > 1e7) bad("grid_step", "grid has too many points");
    if (c.output_dir.empty()) bad("output_dir", "must not be empty");
    if (c.sweep_param == "none" && !c.sweep_values.empty()) bad("sweep_values", "given without a sweep_param");
    if (c.sweep_param != "none" && c.sweep_values.empty()) bad("sweep_values", "needs at least one value");
    if (c.model == ModelKind::reduced) {
        const Complex e2 = c.E2 ? *c.E2 : c.E2_per_g * c.g;
        if (e2 != Complex(0.0)) bad(c.E2 ? "E2" : "E2_per_g", "the reduced model has no drive; set it to 0");
    }
}

inline void check_run(const ScenarioConfig& c, const RunSpec& r) {
    const std::string where = c.sweep_param == "none" ? std::string() : " (" + r.label + ")";
    const std::string key = c.sweep_param == "none" ? "" : "sweep_values";
    ScenarioConfig swept = c;
    if (!std::isnan(r.sweep_value)) apply_sweep(swept, c.sweep_param, r.sweep_value);
    try {
        check_config(swept);
    } catch (const KeyError& e) {
        bad(e.key == c.sweep_param ? key : e.key, e.message + where);
    }
    if (c.t_end > 0.0 && c.t_end < r.evolve.dt) bad("t_end", "must be 0 or at least one step" + where);
    const double lambda = stiffness(r.params, r.model);
    if (r.evolve.dt * lambda > 0.1 * (1.0 + 1e-12)) {
        bad("dt", "dt * Lambda = " + io::format_double(r.evolve.dt * lambda) + " exceeds 0.1" + where);
    }
    if (r.initial.kind == InitialKind::coherent) {
        const double tail = coherent_tail_mass(r.initial.beta0_abs, r.params.N_b - 2);
        if (tail > kTruncationLimit) {
            bad(c.scenario == Kind::fig5 ? "beta0_abs" : "N_b",
                "initial coherent state does not fit: tail mass " + io::format_double(tail) + where);
        }
    }
    if (r.fidelity) {
        try {
            fidelity_target(r);
        } catch (const TruncationOverflow&) {
            bad("N_b", "dark-state cat does not fit in N_b = " + std::to_string(r.params.N_b) + where);
        }
    }
}

}  // namespace detail

/// Throws ConfigError naming the offending key.
inline void validate_config(const ScenarioConfig& cfg) {
    try {
        detail::check_config(cfg);
        for (const auto& r : expand_runs(cfg)) detail::check_run(cfg, r);
    } catch (const detail::KeyError& e) {
        throw ConfigError(e.key.empty() ? e.message : e.key + ": " + e.message);
    }
}

// ---------------------------------------------------------------- parse / serialize

/// One `key = value` per line, `#` starts a comment. `scenario` is required and selects the defaults.
inline ScenarioConfig parse_config(std::string_view text) {
    struct Entry {
        std::string key;
        std::string value;
        int line;
    };
    std::vector<Entry> entries;
    std::map<std::string, int> lines;
    int line_no = 0;
    for (auto raw : io::split(text, '\n')) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        const auto line = detail::trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string value(detail::trim(line.substr(eq + 1)));
        if (key.empty()) throw ConfigError("missing key before '='", line_no);
        if (key != "scenario" && !detail::find_field(key)) throw ConfigError("unknown key '" + key + "'", line_no);
        if (lines.count(key)) {
            throw ConfigError("duplicate key '" + key + "' (first on line " + std::to_string(lines[key]) + ")", line_no);
        }
        lines[key] = line_no;
        entries.push_back({key, value, line_no});
    }
    const auto line_of = [&](const std::string& key) {
        const auto it = lines.find(key);
        return it == lines.end() ? 0 : it->second;
    };

    if (!lines.count("scenario")) throw ConfigError("missing required key 'scenario'");
    std::optional<Kind> kind;
    for (const auto& e : entries) {
        if (e.key != "scenario") continue;
        for (Kind k : {Kind::fig3, Kind::fig4, Kind::fig5, Kind::custom}) {
            if (e.value == to_string(k)) kind = k;
        }
        if (!kind) throw ConfigError("unknown scenario '" + e.value + "' (fig3, fig4, fig5, custom)", e.line);
    }
    ScenarioConfig cfg = defaults(*kind);
    for (const auto& e : entries) {
        if (e.key == "scenario") continue;
        const auto* field = detail::find_field(e.key);
        if (*kind == Kind::fig5 && field->fixed_in_fig5) {
            throw ConfigError("'" + e.key + "' is fixed by the fig5 initial-condition presets; use scenario = custom",
                              e.line);
        }
        try {
            field->set(cfg, e.value);
        } catch (const detail::KeyError& err) {
            throw ConfigError(err.key + ": " + err.message, e.line);
        }
    }
    if (lines.count("E2") && lines.count("E2_per_g")) {
        throw ConfigError("E2 and E2_per_g are mutually exclusive", line_of("E2_per_g"));
    }
    if (lines.count("sweep_param") && !lines.count("sweep_values")) {
        if (cfg.sweep_param != "none") throw ConfigError("sweep_param needs sweep_values", line_of("sweep_param"));
        cfg.sweep_values.clear();
    }
    try {
        detail::check_config(cfg);
        for (const auto& r : expand_runs(cfg)) detail::check_run(cfg, r);
    } catch (const detail::KeyError& e) {
        throw ConfigError(e.key.empty() ? e.message : e.key + ": " + e.message, line_of(e.key));
    }
    return cfg;
}

inline std::string serialize_config(const ScenarioConfig& cfg) {
    std::string out = std::string("scenario = ") + to_string(cfg.scenario) + "\n";
    for (const auto& f : detail::fields()) {
        if (cfg.scenario == Kind::fig5 && f.fixed_in_fig5) continue;
        if (auto v = f.get(cfg)) out += std::string(f.key) + " = " + *v + "\n";
    }
    return out;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------- execution

struct RunResult {
    RunSpec spec;
    EvolveResult evolve;
    WignerResult final_wigner;
};

struct WarningTally {
    int count = 0;
    std::string last;  // most recent full message
};

struct ScenarioResult {
    std::vector<RunResult> runs;
    std::map<std::string, WarningTally> warnings;  // keyed by the text before the first ':'
};

inline RunResult execute_run(const RunSpec& spec) {
    Observers obs;
    obs.fidelity_target = fidelity_target(spec);
    if (spec.wigner_series) obs.wigner = spec.grid;
    obs.min_eigenvalue = true;
    RunResult out{spec, integrate_master(initial_density(spec), spec.params, spec.evolve, spec.model, obs), {}};
    const DensityMatrix& rho = out.evolve.final_state;
    out.final_wigner = wigner_grid_and_negativity(rho.is_composite() ? partial_trace_cavity(rho) : rho, spec.grid);
    return out;
}

/// Runs every sweep entry, concurrently when cfg.threads != 1. Results keep config order.
inline ScenarioResult execute(const ScenarioConfig& cfg) {
    validate_config(cfg);
    const auto specs = expand_runs(cfg);
    ScenarioResult result;
    std::vector<std::optional<RunResult>> slots(specs.size());
    std::vector<std::exception_ptr> errors(specs.size());
    std::mutex warn_mutex;
    ScopedWarningHandler capture([&](const std::string& msg) {
        std::lock_guard lock(warn_mutex);
        auto& tally = result.warnings[msg.substr(0, msg.find(':'))];
        ++tally.count;
        tally.last = msg;
    });

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t i = next++; i < specs.size(); i = next++) {
            try {
                slots[i] = execute_run(specs[i]);
            } catch (const NumericalAbort& e) {
                errors[i] = std::make_exception_ptr(NumericalAbort(specs[i].label + ": " + e.message(), e.time()));
            } catch (const TruncationOverflow& e) {
                errors[i] = std::make_exception_ptr(TruncationOverflow(specs[i].label + ": " + e.what()));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    unsigned threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<size_t>(1, specs.size())));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    for (auto& s : slots) result.runs.push_back(std::move(*s));
    return result;
}

// ---------------------------------------------------------------- outputs

struct RunManifest {
    std::string config_echo;
    std::string version = kVersion;
    double wall_time_s = 0.0;
    std::filesystem::path output_dir;
    std::vector<std::string> files;
    std::vector<std::string> diagnostics;
    std::vector<std::string> warnings;

    std::string text() const {
        std::string s = "# optocat run manifest\n";
        s += "version = " + version + "\n";
        s += "wall_time_s = " + io::format_double(wall_time_s) + "\n";
        s += "\n[config]\n" + config_echo;
        s += "\n[files]\n";
        for (const auto& f : files) s += f + "\n";
        s += "\n[diagnostics]\n";
        for (const auto& d : diagnostics) s += d + "\n";
        s += "\n[warnings]\n";
        for (const auto& w : warnings) s += w + "\n";
        return s;
    }
};

/// Final-state observables, one row per run.
inline std::string summary_csv(const ScenarioResult& res) {
    std::string s =
        "run,sweep_value,t_final,steps,steady,P00,P11,P01_re,P01_im,P01_abs,leakage,purity,fidelity,parity,"
        "wigner_min,wigner_negativity\n";
    const auto f = io::format_double;
    for (const auto& r : res.runs) {
        const DensityMatrix& rho = r.evolve.final_state;
        const DensityMatrix rho_b = rho.is_composite() ? partial_trace_cavity(rho) : rho;
        const auto coh = zero_one_coherence(rho_b);
        const auto par = parity_populations(rho_b);
        const auto target = fidelity_target(r.spec);
        const double fid = target ? fidelity_pure(rho_b, *target) : std::numeric_limits<double>::quiet_NaN();
        s += r.spec.label + "," + f(r.spec.sweep_value) + "," + f(r.evolve.t_final) + "," +
             std::to_string(r.evolve.steps) + "," + (r.evolve.steady ? "1" : "0") + "," +
             f(rho_b.matrix()(0, 0).real()) + "," + f(rho_b.matrix()(1, 1).real()) + "," + f(coh.p01.real()) + "," +
             f(coh.p01.imag()) + "," + f(std::abs(coh.p01)) + "," + f(coh.leakage) + "," + f(purity(rho_b)) + "," +
             f(fid) + "," + f(par.even - par.odd) + "," + f(r.final_wigner.w_min) + "," +
             f(std::max(0.0, -r.final_wigner.w_min)) + "\n";
    }
    return s;
}

inline std::string diagnostics_line(const RunResult& r) {
    const auto f = io::format_double;
    const EvolveResult& e = r.evolve;
    return r.spec.label + ": dt=" + f(r.spec.evolve.dt) + " steps=" + std::to_string(e.steps) +
           " t_final=" + f(e.t_final) + " steady=" + (e.steady ? "yes" : "no") +
           " max_trace_drift=" + f(e.max_trace_drift) + " max_hermiticity=" + f(e.max_hermiticity) +
           " max_tail_mech=" + f(e.max_tail_mech) + " max_tail_cavity=" + f(e.max_tail_cavity) +
           " min_eigenvalue=" + f(e.min_eigenvalue) + " wigner_riemann_sum=" + f(r.final_wigner.riemann_sum) +
           " wigner_boundary_max=" + f(r.final_wigner.boundary_max);
}

inline std::filesystem::path resolve_output_dir(const ScenarioConfig& cfg) {
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
    return cfg.output_dir;
}

/// Writes series_<run>.csv, wigner_<run>.csv, summary.csv and manifest.txt.
inline RunManifest write_outputs(const ScenarioConfig& cfg, const ScenarioResult& res,
                                 const std::filesystem::path& dir, double wall_time_s) {
    std::vector<io::NamedSeries> series;
    std::vector<io::NamedGrid> grids;
    for (const auto& r : res.runs) {
        series.push_back({"series_" + r.spec.label, r.evolve.series});
        grids.push_back({"wigner_" + r.spec.label, r.final_wigner.grid});
    }
    RunManifest m;
    m.config_echo = serialize_config(cfg);
    m.wall_time_s = wall_time_s;
    m.output_dir = dir;
    m.files = io::emit_outputs(series, grids, dir);
    io::write_atomically(dir / "summary.csv", summary_csv(res));
    m.files.push_back("summary.csv");
    for (const auto& r : res.runs) m.diagnostics.push_back(diagnostics_line(r));
    for (const auto& [kind, tally] : res.warnings) {
        m.warnings.push_back(std::to_string(tally.count) + "x " + kind + " (last: " + tally.last + ")");
    }
    io::write_atomically(dir / "manifest.txt", m.text());
    return m;
}

inline RunManifest run_scenario(const ScenarioConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const ScenarioResult res = execute(cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return write_outputs(cfg, res, resolve_output_dir(cfg), wall);
}

}  // namespace optocat::scenario
