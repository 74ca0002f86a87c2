#pragma once

#include "dg_field.hpp"
#include "mesh.hpp"
#include "stepper.hpp"

#include <Eigen/Dense>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ksddg {

/// Shortest text that reads back to the same double.
inline std::string format_double(double v)
{
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out)
        throw std::runtime_error("cannot write '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace detail {
inline std::vector<double> parse_csv_row(const std::string& line, std::size_t expected, const std::string& where)
{
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (cell.empty() || end != cell.c_str() + cell.size())
            throw std::runtime_error(where + ": malformed number '" + cell + "'");
        out.push_back(v);
    }
    if (out.size() != expected)
        throw std::runtime_error(where + ": expected " + std::to_string(expected) + " columns");
    return out;
}
} // namespace detail

// ---------------------------------------------------------------- time series

inline constexpr const char* kTimeseriesHeader = "t,mass_u,mass_c,energy,min_u,max_u,min_c,theta_min";

inline std::string format_timeseries(const std::vector<DiagnosticsRecord>& records)
{
    std::string s = kTimeseriesHeader;
    s += '\n';
    for (const auto& r : records) {
        for (double v : {r.t, r.mass_u, r.mass_c, r.energy, r.min_u, r.max_u, r.min_c}) {
            s += format_double(v);
            s += ',';
        }
        s += format_double(r.theta_min);
        s += '\n';
    }
    return s;
}

inline void write_timeseries(const std::vector<DiagnosticsRecord>& records, const std::filesystem::path& path)
{
    write_text_file(path, format_timeseries(records));
}

inline std::vector<DiagnosticsRecord> parse_timeseries(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kTimeseriesHeader)
        throw std::runtime_error("time series: unexpected header");
    std::vector<DiagnosticsRecord> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        const auto v = detail::parse_csv_row(line, 8, "time series line " + std::to_string(lineno));
        DiagnosticsRecord r;
        r.t = v[0];
        r.mass_u = v[1];
        r.mass_c = v[2];
        r.energy = v[3];
        r.min_u = v[4];
        r.max_u = v[5];
        r.min_c = v[6];
        r.theta_min = v[7];
        out.push_back(r);
    }
    return out;
}

inline std::vector<DiagnosticsRecord> read_timeseries(const std::filesystem::path& path)
{
    return parse_timeseries(read_text_file(path));
}

// ---------------------------------------------------------------- snapshots

struct SnapshotMeta {
    std::string field;
    double t = 0.0;
    int dim = 1;
    int degree = 1;
    std::array<int, 2> elements{1, 1};
    Domain domain;
    BoundaryKind bc = BoundaryKind::Periodic;
    int samples_per_axis = 3;
};

struct Snapshot {
    SnapshotMeta meta;
    std::vector<std::array<double, 2>> points;
    std::vector<double> values;
};

/// k+2 equispaced reference points per axis, endpoints included; x varies fastest.
inline std::vector<std::array<double, 2>> snapshot_reference_points(int dim, int degree)
{
    const int m = degree + 2;
    std::vector<std::array<double, 2>> pts;
    for (int b = 0; b < (dim == 2 ? m : 1); ++b)
        for (int a = 0; a < m; ++a)
            pts.push_back({-1.0 + 2.0 * a / (m - 1), dim == 2 ? -1.0 + 2.0 * b / (m - 1) : 0.0});
    return pts;
}

inline std::string format_snapshot(const DGField& field, const std::string& name, double t)
{
    const auto& sp = field.space();
    const auto& mesh = sp.mesh();
    const Domain& d = mesh.domain();
    const int dim = sp.dim();
    std::string s = "# ksddg snapshot\n";
    s += "# field = " + name + "\n";
    s += "# t = " + format_double(t) + "\n";
    s += "# dim = " + std::to_string(dim) + "\n";
    s += "# degree = " + std::to_string(sp.degree()) + "\n";
    s += "# elements = " + std::to_string(mesh.count(0));
    if (dim == 2)
        s += "," + std::to_string(mesh.count(1));
    s += "\n# domain = " + format_double(d.lower[0]) + "," + format_double(d.upper[0]);
    if (dim == 2)
        s += "," + format_double(d.lower[1]) + "," + format_double(d.upper[1]);
    s += "\n# boundary = " + to_string(mesh.boundary()) + "\n";
    s += "# samples_per_axis = " + std::to_string(sp.degree() + 2) + "\n";
    s += dim == 2 ? "# columns = x,y,value\n" : "# columns = x,value\n";

    const auto ref = snapshot_reference_points(dim, sp.degree());
    for (int e = 0; e < sp.num_elements(); ++e)
        for (const auto& xi : ref) {
            const auto x = sp.reference_to_physical(e, xi);
            s += format_double(x[0]) + ",";
            if (dim == 2)
                s += format_double(x[1]) + ",";
            s += format_double(evaluate(field, e, xi)) + "\n";
        }
    return s;
}

inline void write_snapshot(const DGField& field, const std::string& name, double t, const std::filesystem::path& path)
{
    write_text_file(path, format_snapshot(field, name, t));
}

inline Snapshot parse_snapshot(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::map<std::string, std::string> meta;
    Snapshot snap;
    std::size_t columns = 0;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                continue;
            auto key = line.substr(1, eq - 1);
            key.erase(0, key.find_first_not_of(' '));
            key.erase(key.find_last_not_of(' ') + 1);
            auto val = line.substr(eq + 1);
            val.erase(0, val.find_first_not_of(' '));
            meta[key] = val;
            continue;
        }
        if (columns == 0) {
            if (!meta.count("dim"))
                throw std::runtime_error("snapshot: data before the metadata header");
            columns = std::stoi(meta.at("dim")) + 1;
        }
        const auto v = detail::parse_csv_row(line, columns, "snapshot line " + std::to_string(lineno));
        snap.points.push_back({v[0], columns == 3 ? v[1] : 0.0});
        snap.values.push_back(v.back());
    }
    for (const char* k : {"field", "t", "dim", "degree", "elements", "domain", "boundary", "samples_per_axis"})
        if (!meta.count(k))
            throw std::runtime_error(std::string("snapshot: missing metadata '") + k + "'");

    auto numbers = [](const std::string& s) {
        std::vector<double> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ','))
            out.push_back(std::stod(cell));
        return out;
    };
    SnapshotMeta& m = snap.meta;
    m.field = meta["field"];
    m.t = std::stod(meta["t"]);
    m.dim = std::stoi(meta["dim"]);
    m.degree = std::stoi(meta["degree"]);
    m.samples_per_axis = std::stoi(meta["samples_per_axis"]);
    const auto el = numbers(meta["elements"]);
    const auto dom = numbers(meta["domain"]);
    if (m.dim < 1 || m.dim > 2 || el.size() != static_cast<std::size_t>(m.dim)
        || dom.size() != static_cast<std::size_t>(2 * m.dim))
        throw std::runtime_error("snapshot: inconsistent mesh metadata");
    m.elements = {static_cast<int>(el[0]), m.dim == 2 ? static_cast<int>(el[1]) : 1};
    m.domain = m.dim == 1 ? interval(dom[0], dom[1]) : rectangle(dom[0], dom[1], dom[2], dom[3]);
    if (meta["boundary"] == "periodic")
        m.bc = BoundaryKind::Periodic;
    else if (meta["boundary"] == "zeroflux")
        m.bc = BoundaryKind::ZeroFlux;
    else
        throw std::runtime_error("snapshot: unknown boundary kind");
    std::size_t expected = static_cast<std::size_t>(m.elements[0]) * m.elements[1];
    for (int a = 0; a < m.dim; ++a)
        expected *= m.samples_per_axis;
    if (snap.values.size() != expected)
        throw std::runtime_error("snapshot: row count does not match the metadata");
    return snap;
}

inline Snapshot read_snapshot(const std::filesystem::path& path)
{
    return parse_snapshot(read_text_file(path));
}

/// Recover the DG field from sampled values: per element, a least-squares fit of the
/// nodal basis to the samples (exact for the written polynomial up to round-off).
inline DGField snapshot_to_field(const Snapshot& snap)
{
    const SnapshotMeta& m = snap.meta;
    if (m.samples_per_axis != m.degree + 2)
        throw std::runtime_error("snapshot: unsupported sampling lattice");
    const Mesh mesh = build_mesh(m.domain, m.dim == 1 ? std::array<int, 2>{m.elements[0], 1} : m.elements, m.bc);
    auto space = make_space(mesh, m.degree);
    const auto ref = snapshot_reference_points(m.dim, m.degree);
    const int n = space->nodes_per_element();
    Eigen::MatrixXd V(static_cast<Eigen::Index>(ref.size()), n);
    for (std::size_t p = 0; p < ref.size(); ++p) {
        const auto phi = space->basis_values(ref[p]);
        for (int i = 0; i < n; ++i)
            V(static_cast<Eigen::Index>(p), i) = phi[i];
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
    DGField out(space);
    for (int e = 0; e < space->num_elements(); ++e) {
        Eigen::VectorXd b(static_cast<Eigen::Index>(ref.size()));
        for (std::size_t p = 0; p < ref.size(); ++p)
            b(static_cast<Eigen::Index>(p)) = snap.values[static_cast<std::size_t>(e) * ref.size() + p];
        const Eigen::VectorXd c = qr.solve(b);
        auto w = out.element(e);
        for (int i = 0; i < n; ++i)
            w[i] = c(i);
    }
    return out;
}

// ---------------------------------------------------------------- convergence tables

struct ConvergenceRow {
    int N = 0;
    double err_u = 0.0;
    std::optional<double> rate_u;
    double err_c = 0.0;
    std::optional<double> rate_c;
};

struct RateRow {
    int N = 0;
    double err = 0.0;
    std::optional<double> rate; ///< empty on the first row
};

/// rate_i = log(err_{i-1}/err_i) / log(N_i/N_{i-1}); works for non-doubling sequences.
inline std::vector<RateRow> convergence_rates(const std::vector<std::pair<int, double>>& errors)
{
    if (errors.size() < 2)
        throw std::invalid_argument("convergence_rates: need at least two rows");
    std::vector<RateRow> rows;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        const auto [N, err] = errors[i];
        if (!(err > 0.0) || !std::isfinite(err))
            throw std::invalid_argument("convergence_rates: errors must be positive");
        RateRow r{N, err, std::nullopt};
        if (i > 0) {
            const auto [Np, ep] = errors[i - 1];
            if (N <= Np)
                throw std::invalid_argument("convergence_rates: N must increase");
            r.rate = std::log(ep / err) / std::log(static_cast<double>(N) / Np);
        }
        rows.push_back(r);
    }
    return rows;
}

inline std::vector<ConvergenceRow> convergence_table(
    const std::vector<int>& N, const std::vector<double>& err_u, const std::vector<double>& err_c)
{
    if (N.size() != err_u.size() || N.size() != err_c.size())
        throw std::invalid_argument("convergence_table: column lengths differ");
    std::vector<std::pair<int, double>> eu, ec;
    for (std::size_t i = 0; i < N.size(); ++i) {
        eu.emplace_back(N[i], err_u[i]);
        ec.emplace_back(N[i], err_c[i]);
    }
    const auto ru = convergence_rates(eu);
    const auto rc = convergence_rates(ec);
    std::vector<ConvergenceRow> rows;
    for (std::size_t i = 0; i < N.size(); ++i)
        rows.push_back({N[i], err_u[i], ru[i].rate, err_c[i], rc[i].rate});
    return rows;
}

inline std::string format_convergence_csv(const std::vector<ConvergenceRow>& rows)
{
    std::string s = "N,err_u,rate_u,err_c,rate_c\n";
    for (const auto& r : rows) {
        s += std::to_string(r.N) + "," + format_double(r.err_u) + ",";
        s += (r.rate_u ? format_double(*r.rate_u) : "") + ",";
        s += format_double(r.err_c) + ",";
        s += (r.rate_c ? format_double(*r.rate_c) : "") + "\n";
    }
    return s;
}

/// Human-readable table: N, error and order for u and c.
inline std::string format_convergence_table(const std::vector<ConvergenceRow>& rows)
{
    std::string s = "     N       L2 err u    order      L2 err c    order\n";
    char buf[128];
    for (const auto& r : rows) {
        auto rate = [](const std::optional<double>& x) {
            char b[16];
            if (x)
                std::snprintf(b, sizeof b, "%8.2f", *x);
            else
                std::snprintf(b, sizeof b, "%8s", "-");
            return std::string(b);
        };
        std::snprintf(buf, sizeof buf, "%6d  %12.2E %s  %12.2E %s\n", r.N, r.err_u, rate(r.rate_u).c_str(), r.err_c,
            rate(r.rate_c).c_str());
        s += buf;
    }
    return s;
}

} // namespace ksddg
