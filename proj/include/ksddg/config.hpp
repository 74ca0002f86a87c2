#pragma once

#include "ddg_operator.hpp"
#include "ks_model.hpp"
#include "mesh.hpp"
#include "stepper.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ksddg {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Experiment { Conv1d, Conv2d, Equilibrium, Blowup, Custom };

/// Initial data families. The Gaussian families are centred on the domain midpoint.
enum class InitialData { Mms1d, Mms2d, Equilibrium, Blowup, Uniform };

inline std::string to_string(Experiment e)
{
    switch (e) {
    case Experiment::Conv1d: return "conv1d";
    case Experiment::Conv2d: return "conv2d";
    case Experiment::Equilibrium: return "equilibrium";
    case Experiment::Blowup: return "blowup";
    case Experiment::Custom: return "custom";
    }
    return "custom";
}

inline std::string to_string(InitialData d)
{
    switch (d) {
    case InitialData::Mms1d: return "mms1d";
    case InitialData::Mms2d: return "mms2d";
    case InitialData::Equilibrium: return "equilibrium";
    case InitialData::Blowup: return "blowup";
    case InitialData::Uniform: return "uniform";
    }
    return "uniform";
}

inline Experiment experiment_from_string(const std::string& s)
{
    for (auto e : {Experiment::Conv1d, Experiment::Conv2d, Experiment::Equilibrium, Experiment::Blowup,
             Experiment::Custom})
        if (to_string(e) == s)
            return e;
    throw ConfigError("unknown experiment '" + s + "' (conv1d, conv2d, equilibrium, blowup, custom)");
}

struct ExperimentConfig {
    Experiment experiment = Experiment::Custom;
    std::vector<int> N{32};
    int degree = 1;
    std::optional<double> beta0; ///< unset: the experiment's default flux
    std::optional<double> beta1;
    KSParams params;
    MobilityModel model = MobilityModel::Saturated;
    BoundaryKind bc = BoundaryKind::Periodic;
    Domain domain = interval(0.0, 2.0 * std::numbers::pi);
    double T_final = 0.01;
    StepConfig step;
    std::string output_dir = "out";
    std::vector<double> snapshot_times;
    InitialData initial = InitialData::Mms1d;
    double uniform_u = 0.3; ///< u level of the uniform pair (u, u/alpha)
    bool mms_sources = false;

    [[nodiscard]] bool is_sweep() const
    {
        return experiment == Experiment::Conv1d || experiment == Experiment::Conv2d;
    }

    [[nodiscard]] FluxParams default_flux() const
    {
        if (experiment == Experiment::Blowup)
            return {8.0, 0.0};
        return reproduction_flux(degree);
    }

    [[nodiscard]] FluxParams flux() const
    {
        const FluxParams d = default_flux();
        if (!beta0 && !beta1)
            return d;
        return {beta0.value_or(d.beta0), beta1.value_or(0.0)};
    }

    void validate() const;
};

inline std::vector<int> default_sweep(Experiment e, int degree)
{
    if (e == Experiment::Conv1d)
        return degree == 1 ? std::vector<int>{8, 16, 32, 64, 128} : std::vector<int>{4, 8, 16, 32, 64};
    if (e == Experiment::Conv2d)
        return degree == 1 ? std::vector<int>{10, 20, 30, 40} : std::vector<int>{4, 8, 16};
    return {32};
}

/// Fully populated defaults of a named experiment. degree < 1 selects the experiment's own.
inline ExperimentConfig default_config(Experiment e, int degree = 0)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    ExperimentConfig c;
    c.experiment = e;
    switch (e) {
    case Experiment::Conv1d:
    case Experiment::Custom:
        c.degree = 1;
        c.params = KSParams::from_B(0.1, 0.2, 0.2, 0.01);
        c.domain = interval(0.0, two_pi);
        c.T_final = 0.01;
        c.initial = InitialData::Mms1d;
        c.mms_sources = true;
        break;
    case Experiment::Conv2d:
        c.degree = 1;
        c.params = KSParams::from_B(0.1, 0.2, 0.2, 0.01);
        c.domain = rectangle(0.0, two_pi, 0.0, two_pi);
        c.T_final = 0.01;
        c.initial = InitialData::Mms2d;
        c.mms_sources = true;
        break;
    case Experiment::Equilibrium:
        c.degree = 1;
        c.params = KSParams::from_B(0.1, 0.5, 0.02, 1.0);
        c.domain = rectangle(0.0, 1.0, 0.0, 1.0);
        c.T_final = 0.5;
        c.initial = InitialData::Equilibrium;
        c.snapshot_times = {0.0, 0.01, 0.03, 0.05, 0.1, 0.5};
        break;
    case Experiment::Blowup:
        c.degree = 2;
        c.params = KSParams{1.0, 1.0, 1.0, 1.0};
        c.model = MobilityModel::Linear;
        c.bc = BoundaryKind::ZeroFlux;
        c.domain = rectangle(-0.5, 0.5, -0.5, 0.5);
        c.T_final = 5e-5;
        c.initial = InitialData::Blowup;
        c.snapshot_times = {0.0, 1e-5, 5e-5};
        break;
    }
    if (degree >= 1)
        c.degree = degree;
    c.N = default_sweep(e, c.degree);
    c.output_dir = "out/" + to_string(e);
    return c;
}

inline void ExperimentConfig::validate() const
{
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    const std::string name = to_string(experiment);
    if (N.empty())
        fail("mesh.N: at least one resolution is required");
    for (int n : N)
        if (n < 1)
            fail("mesh.N: resolutions must be positive");
    if (is_sweep()) {
        if (N.size() < 2)
            fail(name + ": a convergence sweep needs at least two resolutions");
        if (!std::is_sorted(N.begin(), N.end()) || std::adjacent_find(N.begin(), N.end()) != N.end())
            fail(name + ": mesh.N must be strictly increasing");
    } else if (N.size() != 1) {
        fail(name + ": mesh.N must be a single resolution");
    }
    if (degree < 1 || degree > 6)
        fail("mesh.degree must lie in 1..6");
    for (int a = 0; a < domain.dim; ++a)
        if (!(domain.upper[a] > domain.lower[a]))
            fail("mesh.domain: empty interval");
    if (!(T_final > 0.0))
        fail("time.T_final must be positive");
    for (double s : snapshot_times)
        if (s < 0.0 || s > T_final)
            fail("output.snapshots: times must lie in [0, T_final]");
    try {
        params.validate();
        step.validate();
        flux().validate();
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }

    auto require = [&](bool ok, const std::string& what) {
        if (!ok)
            fail(name + " requires " + what);
    };
    switch (experiment) {
    case Experiment::Conv1d:
        require(domain.dim == 1, "a 1D domain");
        require(bc == BoundaryKind::Periodic, "periodic boundaries");
        require(model == MobilityModel::Saturated, "the saturated mobility");
        require(initial == InitialData::Mms1d && mms_sources, "the mms1d data with mms sources");
        break;
    case Experiment::Conv2d:
        require(domain.dim == 2, "a 2D domain");
        require(bc == BoundaryKind::Periodic, "periodic boundaries");
        require(model == MobilityModel::Saturated, "the saturated mobility");
        require(initial == InitialData::Mms2d && mms_sources, "the mms2d data with mms sources");
        break;
    case Experiment::Equilibrium:
        require(domain.dim == 2, "a 2D domain");
        require(model == MobilityModel::Saturated, "the saturated mobility");
        require(initial == InitialData::Equilibrium && !mms_sources, "the equilibrium data without sources");
        break;
    case Experiment::Blowup:
        require(domain.dim == 2, "a 2D domain");
        require(model == MobilityModel::Linear, "the linear mobility");
        require(bc == BoundaryKind::ZeroFlux, "zero-flux boundaries");
        require(initial == InitialData::Blowup && !mms_sources, "the blowup data without sources");
        break;
    case Experiment::Custom:
        break;
    }
    const bool mms_data = initial == InitialData::Mms1d || initial == InitialData::Mms2d;
    if (mms_sources && !mms_data)
        fail("model.sources = mms needs mms1d or mms2d initial data");
    if (initial == InitialData::Mms1d && domain.dim != 1)
        fail("mms1d initial data needs a 1D domain");
    if ((initial == InitialData::Mms2d || initial == InitialData::Equilibrium || initial == InitialData::Blowup)
        && domain.dim != 2)
        fail("model.initial = " + to_string(initial) + " needs a 2D domain");
    if (initial == InitialData::Uniform && !admissible(uniform_u, model))
        fail("model.uniform_u is outside the admissible range");
}

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(trim(item));
    if (out.size() == 1 && out[0].empty())
        out.clear();
    return out;
}

// A real number, a ratio "7/6", or a multiple of pi: "2pi", "2*pi", "-pi", "pi".
inline double parse_real(const std::string& key, const std::string& raw)
{
    std::string s = trim(raw);
    if (const auto slash = s.find('/'); slash != std::string::npos) {
        const double den = parse_real(key, s.substr(slash + 1));
        if (den == 0.0)
            throw ConfigError(key + ": division by zero in '" + raw + "'");
        return parse_real(key, s.substr(0, slash)) / den;
    }
    double factor = 1.0;
    if (s.size() >= 2 && s.compare(s.size() - 2, 2, "pi") == 0) {
        factor = std::numbers::pi;
        s = trim(s.substr(0, s.size() - 2));
        if (!s.empty() && s.back() == '*')
            s = trim(s.substr(0, s.size() - 1));
        if (s.empty() || s == "+")
            s = "1";
        else if (s == "-")
            s = "-1";
    }
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
        throw ConfigError(key + ": '" + raw + "' is not a number");
    return v * factor;
}

inline int parse_int(const std::string& key, const std::string& raw)
{
    const std::string s = trim(raw);
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || v < -1000000000L || v > 1000000000L)
        throw ConfigError(key + ": '" + raw + "' is not an integer");
    return static_cast<int>(v);
}

inline bool parse_bool(const std::string& key, const std::string& raw)
{
    const std::string s = trim(raw);
    if (s == "true" || s == "on" || s == "yes" || s == "1")
        return true;
    if (s == "false" || s == "off" || s == "no" || s == "0")
        return false;
    throw ConfigError(key + ": '" + raw + "' is not a boolean");
}

struct Entry {
    std::string key; // section.key, or a bare key outside any section
    std::string value;
    std::string origin;
};

inline Entry parse_assignment(const std::string& text, const std::string& section, const std::string& origin)
{
    const auto eq = text.find('=');
    if (eq == std::string::npos)
        throw ConfigError(origin + ": expected key = value");
    const std::string k = trim(text.substr(0, eq));
    if (k.empty())
        throw ConfigError(origin + ": empty key");
    return {section.empty() ? k : section + "." + k, trim(text.substr(eq + 1)), origin};
}

inline void apply_entry(ExperimentConfig& c, const Entry& en, std::optional<double>& B, std::optional<double>& D,
    bool& n_set)
{
    const std::string& k = en.key;
    const std::string& v = en.value;
    auto real = [&] { return parse_real(k, v); };
    auto integer = [&] { return parse_int(k, v); };
    auto reals = [&] {
        std::vector<double> out;
        if (v != "none")
            for (const auto& t : split_list(v))
                out.push_back(parse_real(k, t));
        return out;
    };

    if (k == "mesh.N") {
        c.N.clear();
        for (const auto& t : split_list(v))
            c.N.push_back(parse_int(k, t));
        n_set = true;
    } else if (k == "mesh.degree") {
        c.degree = integer();
    } else if (k == "mesh.domain") {
        const auto d = reals();
        if (d.size() == 2)
            c.domain = interval(d[0], d[1]);
        else if (d.size() == 4)
            c.domain = rectangle(d[0], d[1], d[2], d[3]);
        else
            throw ConfigError(k + ": expected lo,hi or xlo,xhi,ylo,yhi");
    } else if (k == "mesh.boundary") {
        if (v == "periodic")
            c.bc = BoundaryKind::Periodic;
        else if (v == "zeroflux")
            c.bc = BoundaryKind::ZeroFlux;
        else
            throw ConfigError(k + ": expected periodic or zeroflux");
    } else if (k == "flux.beta0") {
        c.beta0 = real();
    } else if (k == "flux.beta1") {
        c.beta1 = real();
    } else if (k == "model.chi") {
        c.params.chi = real();
    } else if (k == "model.D") {
        D = real();
    } else if (k == "model.B") {
        B = real();
    } else if (k == "model.alpha") {
        c.params.alpha = real();
    } else if (k == "model.beta") {
        c.params.beta = real();
    } else if (k == "model.mobility") {
        if (v == "saturated")
            c.model = MobilityModel::Saturated;
        else if (v == "linear")
            c.model = MobilityModel::Linear;
        else
            throw ConfigError(k + ": expected saturated or linear");
    } else if (k == "model.initial") {
        bool found = false;
        for (auto d : {InitialData::Mms1d, InitialData::Mms2d, InitialData::Equilibrium, InitialData::Blowup,
                 InitialData::Uniform})
            if (to_string(d) == v) {
                c.initial = d;
                found = true;
            }
        if (!found)
            throw ConfigError(k + ": expected mms1d, mms2d, equilibrium, blowup or uniform");
    } else if (k == "model.uniform_u") {
        c.uniform_u = real();
    } else if (k == "model.sources") {
        if (v == "none")
            c.mms_sources = false;
        else if (v == "mms")
            c.mms_sources = true;
        else
            throw ConfigError(k + ": expected none or mms");
    } else if (k == "time.T_final") {
        c.T_final = real();
    } else if (k == "time.dt_rule") {
        if (v == "mesh")
            c.step.dt_rule = DtRule::MeshScaled;
        else if (v == "fixed")
            c.step.dt_rule = DtRule::Fixed;
        else
            throw ConfigError(k + ": expected mesh or fixed");
    } else if (k == "time.dt_factor") {
        c.step.dt_factor = real();
    } else if (k == "time.dt") {
        c.step.dt = real();
    } else if (k == "solver.newton_tol") {
        c.step.newton_tol = real();
    } else if (k == "solver.newton_max_iter") {
        c.step.newton_max_iter = integer();
    } else if (k == "solver.damping") {
        c.step.damping = real();
    } else if (k == "solver.limiter") {
        c.step.limiter = parse_bool(k, v);
    } else if (k == "solver.cfl_check") {
        c.step.cfl_check = parse_bool(k, v);
    } else if (k == "solver.linear_tol") {
        c.step.linear_tol = real();
    } else if (k == "solver.linear_max_iter") {
        c.step.linear_max_iter = integer();
    } else if (k == "solver.gmres_restart") {
        c.step.gmres_restart = integer();
    } else if (k == "output.dir") {
        if (v.empty())
            throw ConfigError(k + ": empty directory");
        c.output_dir = v;
    } else if (k == "output.snapshots") {
        c.snapshot_times = reals();
        std::sort(c.snapshot_times.begin(), c.snapshot_times.end());
        c.snapshot_times.erase(std::unique(c.snapshot_times.begin(), c.snapshot_times.end()), c.snapshot_times.end());
    } else {
        throw ConfigError(en.origin + ": unknown key '" + k + "'");
    }
}

} // namespace detail

/// Parse the key = value format with [section] headers. `overrides` are "section.key=value"
/// strings applied after the file, in order. The experiment's defaults are filled in first.
inline ExperimentConfig parse_config(std::istream& in, const std::vector<std::string>& overrides = {})
{
    std::vector<detail::Entry> entries;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const std::string origin = "line " + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(origin + ": empty section name");
            continue;
        }
        entries.push_back(detail::parse_assignment(line, section, origin));
    }
    for (const auto& o : overrides)
        entries.push_back(detail::parse_assignment(o, "", "--set " + o));

    Experiment exp = Experiment::Custom;
    for (const auto& en : entries)
        if (en.key == "experiment")
            exp = experiment_from_string(en.value);

    ExperimentConfig c = default_config(exp);
    const double default_B = c.params.B();
    std::optional<double> B;
    std::optional<double> D;
    bool n_set = false;
    for (const auto& en : entries)
        if (en.key != "experiment")
            detail::apply_entry(c, en, B, D, n_set);
    if (B && D)
        throw ConfigError("model.B and model.D are mutually exclusive");
    // B = D/chi is the primary parameter: changing chi alone keeps B.
    c.params.D = D ? *D : B.value_or(default_B) * c.params.chi;
    if (!n_set)
        c.N = default_sweep(exp, c.degree);
    c.validate();
    return c;
}

inline ExperimentConfig parse_config_string(const std::string& text, const std::vector<std::string>& overrides = {})
{
    std::istringstream in(text);
    return parse_config(in, overrides);
}

inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {})
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in, overrides);
}

} // namespace ksddg
