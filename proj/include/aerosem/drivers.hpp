#pragma once

/// @file drivers.hpp
/// @brief The batch drivers behind the CLI subcommands.
///
/// Each driver reads a typed configuration from JSON (collecting every
/// problem), runs, and writes its outputs through an output::RunDirectory.
/// The compute parts are callable without touching the file system.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "aerosem/assembly.hpp"
#include "aerosem/config.hpp"
#include "aerosem/curle.hpp"
#include "aerosem/error.hpp"
#include "aerosem/fvsource.hpp"
#include "aerosem/mesh.hpp"
#include "aerosem/mesh_io.hpp"
#include "aerosem/mms.hpp"
#include "aerosem/newmark.hpp"
#include "aerosem/output.hpp"
#include "aerosem/projection.hpp"
#include "aerosem/space.hpp"
#include "aerosem/vtk.hpp"

namespace aerosem::drivers {

using nlohmann::json;
namespace fs = std::filesystem;

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void require_degree(config::Reader& r, const json& j, int& degree) {
    if (auto d = r.get<int>(j, "", "degree")) {
        degree = *d;
        r.check(degree >= 1 && degree <= 16, "degree: must lie in [1, 16]");
    }
}

// ---------------------------------------------------------------------------
// mms

struct MmsConfig {
    std::string solution = "trigonometric";
    std::vector<int> degrees;
    std::vector<int> divisions;
    mms::CaseParams base;
    config::OutputSpec output;
};

inline MmsConfig parse_mms(const json& j) {
    config::Reader r;
    config::check_header(j, r, "mms");
    MmsConfig c;
    c.solution = r.get_or<std::string>(j, "", "solution", "trigonometric");
    r.check(c.solution == "trigonometric" || c.solution == "polynomial",
            "solution: unknown \"" + c.solution + "\" (trigonometric | polynomial)");
    c.degrees = r.get<std::vector<int>>(j, "", "degrees").value_or(std::vector<int>{});
    c.divisions = r.get<std::vector<int>>(j, "", "divisions").value_or(std::vector<int>{});
    r.check(!c.degrees.empty(), "degrees: must not be empty");
    r.check(!c.divisions.empty(), "divisions: must not be empty");
    for (int d : c.degrees) r.check(d >= 1 && d <= 16, "degrees: entries must lie in [1, 16]");
    for (int n : c.divisions) r.check(n >= 1, "divisions: entries must be >= 1");
    r.check(std::is_sorted(c.divisions.begin(), c.divisions.end()), "divisions: must be ascending");
    c.base.c0 = config::read_physics(j, r, false).c0;
    const auto t = config::read_time(j, r);
    c.base.dt = t.dt;
    c.base.t_final = t.t_final;
    c.base.beta = t.beta;
    c.base.gamma = t.gamma;
    c.base.cg_tol = t.cg_tol;
    c.base.cg_max_iter = t.cg_max_iter;
    c.output = config::read_output(j, r, "mms");
    r.finish();
    return c;
}

struct MmsRow {
    mms::CaseResult result;
    std::optional<double> order;  ///< against the previous mesh at the same degree
    std::string error;
};

inline std::vector<MmsRow> run_mms_study(const MmsConfig& c) {
    std::vector<MmsRow> rows;
    for (int r : c.degrees) {
        const auto m = c.solution == "polynomial" ? mms::polynomial(r) : mms::trigonometric();
        std::optional<mms::CaseResult> prev;
        for (int n : c.divisions) {
            auto p = c.base;
            p.degree = r;
            p.divisions = n;
            MmsRow row;
            row.result.degree = r;
            row.result.divisions = n;
            row.result.h = 1.0 / n;
            try {
                row.result = mms::run_case(m, p);
                if (prev && prev->l2_error > 0.0 && row.result.l2_error > 0.0)
                    row.order = std::log(prev->l2_error / row.result.l2_error) / std::log(prev->h / row.result.h);
                prev = row.result;
            } catch (const Error& e) {
                row.error = e.what();
                row.result.l2_error = std::numeric_limits<double>::quiet_NaN();
                prev.reset();
            }
            rows.push_back(row);
        }
    }
    return rows;
}

inline json run_mms(const json& j, output::RunDirectory& dir) {
    const auto c = parse_mms(j);
    const auto t0 = std::chrono::steady_clock::now();
    const auto rows = run_mms_study(c);
    std::vector<std::vector<double>> table;
    json report_rows = json::array();
    for (const auto& row : rows) {
        const auto& r = row.result;
        const double order = row.order.value_or(std::numeric_limits<double>::quiet_NaN());
        table.push_back({static_cast<double>(r.degree), static_cast<double>(r.divisions), r.h,
                         static_cast<double>(r.dofs), r.l2_error, order});
        json jr = {{"degree", r.degree}, {"divisions", r.divisions}, {"h", r.h},       {"dofs", r.dofs},
                   {"l2_error", r.l2_error}, {"runtime_s", r.runtime_s}, {"cg_iterations", r.cg_iterations}};
        jr["order"] = row.order ? json(*row.order) : json(nullptr);
        if (!row.error.empty()) jr["error"] = row.error;
        report_rows.push_back(jr);
    }
    dir.write_csv(c.output.name + "_convergence.csv", {"degree", "divisions", "h", "dofs", "l2_error", "order"}, table);
    json report = {{"kind", "mms"}, {"solution", c.solution}, {"rows", report_rows},
                   {"runtime_s", seconds_since(t0)}};
    dir.write_json(c.output.name + "_report.json", report);
    return report;
}

// ---------------------------------------------------------------------------
// projected source files

/// Acoustic-side source snapshots: projected components q_A per time.
struct ProjectedSource {
    int degree = 0;
    std::size_t num_dofs = 0;
    json mesh;  ///< mesh file contents the DOFs refer to
    struct Snapshot {
        double time = 0.0;
        std::vector<std::vector<double>> components;  ///< 3 x N_A
    };
    std::vector<Snapshot> snapshots;
};

inline json projected_to_json(const ProjectedSource& p) {
    json j = {{"format", "aerosem-projected"}, {"version", "1"}, {"degree", p.degree}, {"num_dofs", p.num_dofs},
              {"mesh", p.mesh}};
    auto& s = j["snapshots"] = json::array();
    for (const auto& snap : p.snapshots) s.push_back({{"time", snap.time}, {"components", snap.components}});
    return j;
}

inline ProjectedSource projected_from_json(const json& j, const std::string& where) {
    try {
        detail::require(j.value("format", "") == "aerosem-projected" && j.value("version", "") == "1",
                        ErrorCode::schema, where + ": not an aerosem-projected version \"1\" file");
        ProjectedSource p;
        p.degree = j.at("degree").get<int>();
        p.num_dofs = j.at("num_dofs").get<std::size_t>();
        p.mesh = j.at("mesh");
        double last = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < j.at("snapshots").size(); ++k) {
            const auto& s = j.at("snapshots")[k];
            ProjectedSource::Snapshot snap;
            snap.time = s.at("time").get<double>();
            snap.components = s.at("components").get<std::vector<std::vector<double>>>();
            const std::string rec = where + ", snapshots[" + std::to_string(k) + "]";
            detail::require(snap.time > last, ErrorCode::schema, rec + ": times must increase");
            detail::require(snap.components.size() == 3, ErrorCode::schema, rec + ": expected 3 components");
            for (const auto& c : snap.components)
                detail::require(c.size() == p.num_dofs, ErrorCode::schema, rec + ": component length != num_dofs");
            last = snap.time;
            p.snapshots.push_back(std::move(snap));
        }
        detail::require(!p.snapshots.empty(), ErrorCode::schema, where + ": no snapshots");
        return p;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::schema, where + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// solve

struct SolveConfig {
    config::MeshSpec mesh_spec;
    std::shared_ptr<const HexMesh> mesh;
    int degree = 0;
    config::Physics physics;
    NewmarkConfig time;
    std::vector<config::BoundarySpec> boundaries;
    config::SourceSpec source;
    config::InitialSpec initial;
    std::vector<config::ProbeSpec> probes;
    config::OutputSpec output;
    std::uint64_t seed = 0;
};

inline SolveConfig parse_solve(const json& j, const fs::path& base, std::uint64_t seed) {
    config::Reader r;
    config::check_header(j, r, "solve");
    SolveConfig c;
    c.seed = seed;
    if (const json* m = r.section(j, "", "mesh")) c.mesh_spec = config::read_mesh_spec(*m, "mesh", r, base);
    require_degree(r, j, c.degree);
    c.physics = config::read_physics(j, r, true);
    c.time = config::read_time(j, r);
    c.boundaries = config::read_boundaries(j, r);
    c.source = config::read_source(j, r, base);
    c.initial = config::read_initial(j, r);
    c.probes = config::read_probes(j, r);
    c.output = config::read_output(j, r, "run");
    c.time.snapshot_stride = c.output.snapshot_stride;
    if (r.ok()) {
        // checks that need the mesh
        try {
            c.mesh = std::make_shared<const HexMesh>(c.mesh_spec.build());
        } catch (const Error& e) {
            r.add(std::string("mesh: ") + e.what());
        }
    }
    if (c.mesh) {
        const auto tags = c.mesh->tags();
        std::set<std::string> seen;
        for (std::size_t i = 0; i < c.boundaries.size(); ++i)
            for (const auto& t : c.boundaries[i].tags) {
                r.check(tags.count(t) > 0, "boundary[" + std::to_string(i) + "].tags: \"" + t + "\" not in mesh");
                r.check(seen.insert(t).second, "boundary[" + std::to_string(i) + "].tags: \"" + t + "\" listed twice");
            }
        for (std::size_t i = 0; i < c.probes.size(); ++i)
            r.check(locate_point(*c.mesh, c.probes[i].position).has_value(),
                    "probes[" + std::to_string(i) + "].position: outside the mesh");
        if (c.source.type == config::SourceSpec::Type::monopole)
            r.check(locate_point(*c.mesh, c.source.position).has_value(), "source.position: outside the mesh");
    }
    r.finish();
    return c;
}

struct SolveOutcome {
    RunResult run;
    std::size_t dofs = 0;
    std::size_t elements = 0;
    double energy_initial = 0.0;
    double energy_final = 0.0;
    double runtime_s = 0.0;
};

using SnapshotWriter = std::function<void(const SpectralSpace&, const WaveState&)>;

inline std::vector<double> initial_field(const SpectralSpace& space, const config::InitialSpec& ini, double c0,
                                         std::uint64_t seed, std::vector<double>& v0) {
    const auto n = space.num_dofs();
    std::vector<double> rho(n, 0.0);
    v0.assign(n, 0.0);
    if (ini.type == config::InitialSpec::Type::pulse) {
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 d = space.nodes()[i] - ini.center;
            const double s = ini.planar ? dot(*ini.direction, d) : 0.0;
            const double r2 = ini.planar ? s * s : dot(d, d);
            const double g = ini.amplitude * std::exp(-r2 / (2.0 * ini.sigma * ini.sigma));
            rho[i] = g;
            // rho(x, t) = g(x - c0 t dir): rho_t = -c0 dir . grad g
            if (ini.direction) {
                const double dg = ini.planar ? -s / (ini.sigma * ini.sigma) * g
                                             : -dot(*ini.direction, d) / (ini.sigma * ini.sigma) * g;
                v0[i] = -c0 * dg;
            }
        }
    } else if (ini.type == config::InitialSpec::Type::random) {
        std::mt19937_64 gen(seed);
        std::uniform_real_distribution<double> u(-ini.amplitude, ini.amplitude);
        for (auto& x : rho) x = u(gen);
    }
    return rho;
}

inline SolveOutcome solve(const SolveConfig& c, const SnapshotWriter& snapshot = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto space = build_space(c.mesh, c.degree);
    AssembledOperators ops(space, c.physics.c0, c.physics.rho0);
    for (const auto& b : c.boundaries)
        if (b.type == config::BoundarySpec::Type::impedance) ops.add_impedance(b.tags, b.Z);

    const auto n = space.num_dofs();
    std::vector<double> neumann(n, 0.0);
    bool has_neumann = false;
    for (const auto& b : c.boundaries)
        if (b.type == config::BoundarySpec::Type::neumann && b.value != 0.0) {
            const double g = b.value;
            add_neumann_load(space, b.tags, [g](const Vec3&, const Vec3&, double) { return g; }, 0.0, c.physics.c0,
                             neumann);
            has_neumann = true;
        }

    std::optional<PointSource> monopole;
    if (c.source.type == config::SourceSpec::Type::monopole) {
        const double f0 = c.source.f0, amp = c.source.amplitude;
        monopole.emplace(space, c.source.position,
                         [f0, amp](double t) { return amp * std::sin(2.0 * std::numbers::pi * f0 * t); });
    }

    std::vector<double> snap_times;
    std::vector<std::vector<double>> snap_loads;
    if (c.source.type == config::SourceSpec::Type::projected) {
        const auto p = projected_from_json(config::load_json(c.source.file), c.source.file.string());
        detail::require(p.degree == c.degree && p.num_dofs == n, ErrorCode::invalid_argument,
                        "projected source was built for a different space (degree " + std::to_string(p.degree) +
                            ", " + std::to_string(p.num_dofs) + " DOFs)");
        const auto other = mesh_from_json(p.mesh);
        double diff = other.vertices().size() == c.mesh->vertices().size() ? 0.0 : 1e300;
        for (std::size_t v = 0; diff < 1e300 && v < other.vertices().size(); ++v)
            diff = std::max(diff, distance(other.vertices()[v], c.mesh->vertices()[v]));
        detail::require(diff <= 1e-9 * c.mesh->h() && other.elements() == c.mesh->elements(),
                        ErrorCode::invalid_argument, "projected source refers to a different acoustic mesh");
        const auto conv = assemble_convective(space);
        for (const auto& s : p.snapshots) {
            snap_times.push_back(s.time);
            snap_loads.push_back(aeroacoustic_load(conv, s.components[0], s.components[1], s.components[2]));
        }
    }

    // projected loads are held constant from one mapping time to the next
    auto load = [&](std::size_t, double t, std::span<double> out) {
        if (has_neumann)
            for (std::size_t i = 0; i < n; ++i) out[i] += neumann[i];
        if (monopole) monopole->add_load(t, out);
        if (!snap_times.empty()) {
            const auto it = std::upper_bound(snap_times.begin(), snap_times.end(), t + 1e-9 * c.time.dt);
            if (it != snap_times.begin()) {
                const auto& f = snap_loads[static_cast<std::size_t>(it - snap_times.begin()) - 1];
                for (std::size_t i = 0; i < n; ++i) out[i] += f[i];
            }
        }
    };

    std::vector<double> v0;
    auto rho0 = initial_field(space, c.initial, c.physics.c0, c.seed, v0);
    std::vector<Probe> probes;
    for (const auto& p : c.probes) probes.push_back(make_probe(space, p.name, p.position));

    SolveOutcome out;
    out.dofs = n;
    out.elements = space.num_elements();
    {
        WaveState s0;
        s0.rho = rho0;
        s0.v = v0;
        out.energy_initial = discrete_energy(s0, ops);
    }
    RunHooks hooks;
    if (snapshot) hooks.on_snapshot = [&](const WaveState& s) { snapshot(space, s); };
    out.run = run(ops, load, c.time, std::move(rho0), std::move(v0), probes, hooks);
    out.energy_final = discrete_energy(out.run.final_state, ops);
    out.runtime_s = seconds_since(t0);
    return out;
}

inline json run_solve(const json& j, const fs::path& base, std::uint64_t seed, output::RunDirectory& dir) {
    const auto c = parse_solve(j, base, seed);
    if (c.mesh_spec.file) dir.add_input(*c.mesh_spec.file);
    if (c.source.type == config::SourceSpec::Type::projected) dir.add_input(c.source.file);
    std::vector<std::string> snaps;
    const auto res = solve(c, [&](const SpectralSpace& space, const WaveState& s) {
        const std::string name = c.output.name + "_" + std::to_string(s.k) + ".vtk";
        std::vector<double> p(s.rho.size());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = c.physics.c0 * c.physics.c0 * s.rho[i];
        write_vtk(dir.file(name).string(), space, {{"rho", s.rho}, {"p", p}});
        snaps.push_back(name);
    });
    std::vector<std::string> header{"time"};
    for (const auto& p : c.probes) header.push_back(p.name);
    dir.write_csv(c.output.name + "_probes.csv", header, res.run.rows);

    json probes = json::object();
    for (std::size_t k = 0; k < c.probes.size(); ++k) {
        double mx = 0.0;
        for (const auto& row : res.run.rows) mx = std::max(mx, std::abs(row[k + 1]));
        probes[c.probes[k].name] = {{"position", c.probes[k].position}, {"max_abs_rho", mx}};
    }
    json report = {{"kind", "solve"},
                   {"dofs", res.dofs},
                   {"elements", res.elements},
                   {"steps", res.run.final_state.k},
                   {"final_time", res.run.final_state.t},
                   {"total_cg_iterations", res.run.total_cg_iterations},
                   {"max_cg_iterations", res.run.max_cg_iterations},
                   {"energy_initial", res.energy_initial},
                   {"energy_final", res.energy_final},
                   {"probes", probes},
                   {"snapshots", snaps},
                   {"runtime_s", res.runtime_s}};
    dir.write_json(c.output.name + "_report.json", report);
    return report;
}

// ---------------------------------------------------------------------------
// fv-source

struct SyntheticVelocity {
    std::string type;  ///< straining | uniform | vortex
    double amplitude = 1.0;
    Vec3 value{};       ///< uniform
    Vec3 center{};      ///< vortex
    double radius = 1.0;
    double frequency = 0.0;

    Vec3 operator()(const Vec3& x, double t) const {
        if (type == "straining") return {amplitude * x[0], -amplitude * x[1], 0.0};
        if (type == "uniform") return value;
        const double dx = x[0] - center[0], dy = x[1] - center[1];
        const double s = amplitude * std::cos(2.0 * std::numbers::pi * frequency * t) *
                         std::exp(-(dx * dx + dy * dy) / (radius * radius)) / radius;
        return {-s * dy, s * dx, 0.0};
    }
};

struct FvSourceConfig {
    std::optional<fs::path> file;
    std::string velocity_field = "U";
    // synthetic donor data
    Vec3 lo{}, hi{};
    std::array<int, 3> divisions{1, 1, 1};
    SyntheticVelocity velocity;
    std::vector<double> times;
    double rho0 = 0.0;
    fv::BoundaryRule rule = fv::BoundaryRule::zero_gradient;
    std::optional<int> spanwise_axis;
    config::OutputSpec output;
};

inline FvSourceConfig parse_fv_source(const json& j, const fs::path& base) {
    config::Reader r;
    config::check_header(j, r, "fv-source");
    FvSourceConfig c;
    c.rho0 = config::read_physics(j, r, true, false).rho0;
    if (const json* in = r.section(j, "", "input")) {
        if (in->contains("file")) {
            if (auto f = r.get<std::string>(*in, "input", "file")) {
                c.file = config::resolve(base, *f);
                r.check(fs::exists(*c.file), "input.file: " + c.file->string() + " does not exist");
            }
            c.velocity_field = r.get_or<std::string>(*in, "input", "field", "U");
        } else if (const json* s = r.section(*in, "input", "synthetic")) {
            const std::string w = "input.synthetic";
            c.lo = r.get<Vec3>(*s, w, "lo").value_or(Vec3{});
            c.hi = r.get<Vec3>(*s, w, "hi").value_or(Vec3{1, 1, 1});
            c.divisions = r.get<std::array<int, 3>>(*s, w, "divisions").value_or(c.divisions);
            for (int a = 0; a < 3; ++a) {
                r.check(c.hi[a] > c.lo[a], w + ": hi must exceed lo on every axis");
                r.check(c.divisions[a] >= 1, w + ".divisions: entries must be >= 1");
            }
            c.times = r.get_or(*s, w, "times", std::vector<double>{0.0});
            r.check(!c.times.empty() && std::is_sorted(c.times.begin(), c.times.end()) &&
                        std::adjacent_find(c.times.begin(), c.times.end()) == c.times.end(),
                    w + ".times: must be non-empty and strictly increasing");
            if (const json* v = r.section(*s, w, "velocity")) {
                const std::string wv = w + ".velocity";
                c.velocity.type = r.get<std::string>(*v, wv, "type").value_or("");
                c.velocity.amplitude = r.get_or(*v, wv, "amplitude", 1.0);
                if (c.velocity.type == "uniform") {
                    c.velocity.value = r.get<Vec3>(*v, wv, "value").value_or(Vec3{});
                } else if (c.velocity.type == "vortex") {
                    c.velocity.center = r.get<Vec3>(*v, wv, "center").value_or(Vec3{});
                    c.velocity.radius = r.get<double>(*v, wv, "radius").value_or(0.0);
                    r.check(c.velocity.radius > 0.0, wv + ".radius: must be > 0");
                    c.velocity.frequency = r.get_or(*v, wv, "frequency", 0.0);
                } else if (c.velocity.type != "straining") {
                    r.add(wv + ".type: unknown \"" + c.velocity.type + "\" (straining | uniform | vortex)");
                }
            }
        }
    }
    const auto rule = r.get_or<std::string>(j, "", "boundary_rule", "zero_gradient");
    if (rule == "zero_gradient")
        c.rule = fv::BoundaryRule::zero_gradient;
    else if (rule == "prescribed") {
        c.rule = fv::BoundaryRule::prescribed;
        r.check(!c.file.has_value(), "boundary_rule: \"prescribed\" needs synthetic input");
    } else
        r.add("boundary_rule: unknown \"" + rule + "\" (zero_gradient | prescribed)");
    if (j.contains("spanwise")) {
        const int axis = r.get<int>(j.at("spanwise"), "spanwise", "axis").value_or(-1);
        r.check(axis >= 0 && axis < 3, "spanwise.axis: must be 0, 1 or 2");
        c.spanwise_axis = axis;
    }
    c.output = config::read_output(j, r, "source");
    r.finish();
    return c;
}

struct FvSourceOutcome {
    fv::FvMesh mesh;
    std::vector<fv::Field> velocity;
    std::vector<fv::Field> source;
    std::vector<Vec3> volume_integral;
    std::vector<Vec3> boundary_flux;
    std::vector<double> source_l1;  ///< sum over cells of volume * |S|
};

inline FvSourceOutcome fv_source(const FvSourceConfig& c) {
    FvSourceOutcome out;
    if (c.file) {
        auto data = fv::load_fv(c.file->string());
        detail::require(data.mesh.has_value(), ErrorCode::schema, c.file->string() + ": no mesh in FV file");
        out.mesh = std::move(*data.mesh);
        out.velocity = fv::select(data.fields, c.velocity_field);
        detail::require(!out.velocity.empty(), ErrorCode::not_found,
                        c.file->string() + ": no field named \"" + c.velocity_field + "\"");
        for (const auto& f : out.velocity)
            detail::require(f.components == 3, ErrorCode::schema, c.file->string() + ": velocity must have 3 components");
    } else {
        out.mesh = fv::generate_box_fv(c.lo, c.hi, c.divisions);
        for (double t : c.times)
            out.velocity.push_back(fv::sample_vector(out.mesh, [&](const Vec3& x) { return c.velocity(x, t); }, "U", t));
    }
    for (const auto& u : out.velocity) {
        fv::BoundaryTreatment bt;
        bt.rule = c.rule;
        if (c.rule == fv::BoundaryRule::prescribed) {
            const double t = u.time;
            bt.value = [&c, t](std::size_t, const fv::Face& f) { return c.velocity(f.midpoint, t); };
        }
        auto s = fv::lighthill_divergence(out.mesh, u, c.rho0, bt);
        s.time = u.time;
        // the conservation identity is checked before any averaging
        const auto integral = fv::integrate(out.mesh, s);
        out.volume_integral.push_back({integral[0], integral[1], integral[2]});
        out.boundary_flux.push_back(fv::boundary_flux(out.mesh, u, c.rho0, bt));
        double l1 = 0.0;
        for (std::size_t cell = 0; cell < out.mesh.num_cells(); ++cell)
            l1 += out.mesh.cells()[cell].volume * norm(s.vec(cell));
        out.source_l1.push_back(l1);
        if (c.spanwise_axis) {
            auto avg = fv::spanwise_average(out.mesh, s, *c.spanwise_axis);
            s = fv::broadcast(avg);
            s.time = u.time;
        }
        s.name = "lighthill_source";
        out.source.push_back(std::move(s));
    }
    return out;
}

inline json run_fv_source(const json& j, const fs::path& base, output::RunDirectory& dir) {
    const auto c = parse_fv_source(j, base);
    if (c.file) dir.add_input(*c.file);
    const auto res = fv_source(c);
    fv::write_fv(dir.file(c.output.name + ".json").string(), &res.mesh, res.source);
    if (!c.file) fv::write_fv(dir.file(c.output.name + "_velocity.json").string(), &res.mesh, res.velocity);
    std::vector<std::vector<double>> rows;
    double worst = 0.0;
    for (std::size_t k = 0; k < res.source.size(); ++k) {
        const Vec3 a = res.volume_integral[k], b = res.boundary_flux[k];
        // relative to the L1 size of the source so that sign-changing
        // sources with vanishing totals are judged sensibly
        const double scale = std::max(norm(b), res.source_l1[k]);
        if (scale > 0.0) worst = std::max(worst, norm(a - b) / scale);
        rows.push_back({res.source[k].time, a[0], a[1], a[2], b[0], b[1], b[2]});
    }
    dir.write_csv(c.output.name + "_conservation.csv",
                  {"time", "volume_x", "volume_y", "volume_z", "boundary_x", "boundary_y", "boundary_z"}, rows);
    json report = {{"kind", "fv-source"},
                   {"cells", res.mesh.num_cells()},
                   {"faces", res.mesh.faces().size()},
                   {"snapshots", res.source.size()},
                   {"max_relative_conservation_defect", worst},
                   {"spanwise_axis", c.spanwise_axis ? json(*c.spanwise_axis) : json(nullptr)}};
    dir.write_json(c.output.name + "_report.json", report);
    return report;
}

// ---------------------------------------------------------------------------
// project

struct ProjectConfig {
    fs::path file;
    std::string field = "lighthill_source";
    int stride = 1;
    config::MeshSpec mesh_spec;
    std::shared_ptr<const HexMesh> mesh;
    int degree = 0;
    CouplingOptions sampling;
    double cg_tol = 1e-12;
    int cg_max_iter = 5000;
    config::OutputSpec output;
};

inline ProjectConfig parse_project(const json& j, const fs::path& base, std::uint64_t seed) {
    config::Reader r;
    config::check_header(j, r, "project");
    ProjectConfig c;
    if (const json* in = r.section(j, "", "input")) {
        if (auto f = r.get<std::string>(*in, "input", "file")) {
            c.file = config::resolve(base, *f);
            r.check(fs::exists(c.file), "input.file: " + c.file.string() + " does not exist");
        }
        c.field = r.get_or<std::string>(*in, "input", "field", "lighthill_source");
        c.stride = r.get_or(*in, "input", "stride", 1);
        r.check(c.stride >= 1, "input.stride: must be >= 1");
    }
    if (const json* m = r.section(j, "", "mesh")) c.mesh_spec = config::read_mesh_spec(*m, "mesh", r, base);
    require_degree(r, j, c.degree);
    if (j.contains("sampling")) {
        const auto& s = j.at("sampling");
        c.sampling.tet_order = r.get_or(s, "sampling", "tet_order", 2);
        r.check(c.sampling.tet_order >= 1 && c.sampling.tet_order <= 16, "sampling.tet_order: must lie in [1, 16]");
        c.sampling.exact_inside = r.get_or(s, "sampling", "exact_inside", true);
        c.sampling.clip_affine = r.get_or(s, "sampling", "clip_affine", true);
    }
    c.sampling.seed = seed;
    if (j.contains("cg")) {
        c.cg_tol = r.get_or(j.at("cg"), "cg", "tol", 1e-12);
        c.cg_max_iter = r.get_or(j.at("cg"), "cg", "max_iter", 5000);
        r.check(c.cg_tol > 0.0 && c.cg_max_iter > 0, "cg: tol and max_iter must be > 0");
    }
    c.output = config::read_output(j, r, "projected");
    if (r.ok()) {
        try {
            c.mesh = std::make_shared<const HexMesh>(c.mesh_spec.build());
        } catch (const Error& e) {
            r.add(std::string("mesh: ") + e.what());
        }
    }
    r.finish();
    return c;
}

struct ProjectStep {
    double time = 0.0;
    std::array<ProjectionResult, 3> components;
    std::array<double, 3> donor_l1{};  ///< sum over cells of volume * |q|
    double load_sum = 0.0;
    Vec3 load_moment{};  ///< sum_i x_i f_i = -integral of q_A
};

struct ProjectOutcome {
    ProjectedSource projected;
    CouplingMatrix coupling;
    std::vector<double> cell_volumes;
    double fv_volume = 0.0;
    std::vector<ProjectStep> steps;
    double runtime_s = 0.0;
};

inline ProjectOutcome project(const ProjectConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    auto data = fv::load_fv(c.file.string());
    detail::require(data.mesh.has_value(), ErrorCode::schema, c.file.string() + ": no mesh in FV file");
    auto fields = fv::select(data.fields, c.field);
    detail::require(!fields.empty(), ErrorCode::not_found, c.file.string() + ": no field named \"" + c.field + "\"");
    const auto space = build_space(c.mesh, c.degree);
    const Projector proj(space, *data.mesh, c.sampling, c.cg_tol, c.cg_max_iter);
    const auto conv = assemble_convective(space);

    ProjectOutcome out;
    out.coupling = proj.coupling();
    for (const auto& cell : data.mesh->cells()) out.cell_volumes.push_back(cell.volume);
    out.fv_volume = data.mesh->total_volume();
    out.projected.degree = c.degree;
    out.projected.num_dofs = space.num_dofs();
    out.projected.mesh = mesh_to_json(*c.mesh);
    for (std::size_t k = 0; k < fields.size(); k += static_cast<std::size_t>(c.stride)) {
        const auto& f = fields[k];
        ProjectStep step;
        step.time = f.time;
        ProjectedSource::Snapshot snap;
        snap.time = f.time;
        for (int comp = 0; comp < 3; ++comp) {
            if (comp < f.components) {
                const auto q = f.component(comp);
                for (std::size_t l = 0; l < q.size(); ++l) step.donor_l1[comp] += out.cell_volumes[l] * std::abs(q[l]);
                step.components[comp] = proj.project(q);
                snap.components.push_back(step.components[comp].values);
            } else {
                snap.components.emplace_back(space.num_dofs(), 0.0);
            }
        }
        if (f.components == 3) {
            const auto load = aeroacoustic_load(conv, snap.components[0], snap.components[1], snap.components[2]);
            step.load_sum = linalg::sum(load);
            for (std::size_t i = 0; i < load.size(); ++i) step.load_moment += load[i] * space.nodes()[i];
        }
        out.steps.push_back(std::move(step));
        out.projected.snapshots.push_back(std::move(snap));
    }
    out.runtime_s = seconds_since(t0);
    return out;
}

inline json run_project(const json& j, const fs::path& base, std::uint64_t seed, output::RunDirectory& dir) {
    const auto c = parse_project(j, base, seed);
    dir.add_input(c.file);
    if (c.mesh_spec.file) dir.add_input(*c.mesh_spec.file);
    const auto res = project(c);
    dir.write_json(c.output.name + ".json", projected_to_json(res.projected));

    std::vector<std::vector<double>> audit;
    for (std::size_t l = 0; l < res.cell_volumes.size(); ++l)
        audit.push_back({static_cast<double>(l), res.cell_volumes[l], res.coupling.column_sums[l]});
    dir.write_csv(c.output.name + "_audit.csv", {"cell", "volume", "column_sum"}, audit);

    std::vector<std::vector<double>> cons;
    json steps = json::array();
    double worst = 0.0;
    for (const auto& s : res.steps) {
        json comps = json::array();
        for (int comp = 0; comp < 3; ++comp) {
            const auto& r = s.components[comp];
            cons.push_back({s.time, static_cast<double>(comp), r.donor_total, r.acoustic_total,
                            static_cast<double>(r.cg.iterations), r.cg.relative_residual});
            comps.push_back({{"donor_total", r.donor_total},
                             {"acoustic_total", r.acoustic_total},
                             {"cg_iterations", r.cg.iterations},
                             {"relative_residual", r.cg.relative_residual}});
            const double scale = std::max(std::abs(r.donor_total), s.donor_l1[comp]);
            if (scale > 0.0) worst = std::max(worst, std::abs(r.donor_total - r.acoustic_total) / scale);
        }
        steps.push_back({{"time", s.time}, {"components", comps}, {"load_sum", s.load_sum},
                         {"load_moment", s.load_moment}});
    }
    dir.write_csv(c.output.name + "_conservation.csv",
                  {"time", "component", "donor_total", "acoustic_total", "cg_iterations", "relative_residual"}, cons);

    const auto& cm = res.coupling;
    double covered = 0.0;
    for (double v : cm.column_sums) covered += v;
    json warnings = json::array();
    if (cm.cells_outside > 0)
        warnings.push_back(std::to_string(cm.cells_outside) + " FV cells lie outside the acoustic mesh (zero columns)");
    if (cm.cells_partial > 0)
        warnings.push_back(std::to_string(cm.cells_partial) + " FV cells only partly overlap the acoustic mesh");
    json report = {{"kind", "project"},
                   {"degree", c.degree},
                   {"dofs", res.projected.num_dofs},
                   {"cells", res.cell_volumes.size()},
                   {"snapshots", res.steps.size()},
                   {"sampling",
                    {{"tet_order", cm.options.tet_order},
                     {"exact_inside", cm.options.exact_inside},
                     {"clip_affine", cm.options.clip_affine},
                     {"seed", cm.options.seed},
                     {"total_samples", cm.total_samples},
                     {"cells_exact", cm.cells_exact},
                     {"cells_clipped", cm.cells_clipped},
                     {"cells_centroid", cm.cells_centroid}}},
                   {"audit",
                    {{"fv_volume", res.fv_volume},
                     {"covered_volume", covered},
                     {"cells_outside", cm.cells_outside},
                     {"cells_partial", cm.cells_partial},
                     {"max_column_sum_deviation", cm.max_volume_deviation},
                     {"max_relative_transfer_defect", worst}}},
                   {"warnings", warnings},
                   {"steps", steps},
                   {"runtime_s", res.runtime_s}};
    dir.write_json(c.output.name + "_report.json", report);
    return report;
}

// ---------------------------------------------------------------------------
// curle

struct CurleConfig {
    double c0 = 0.0;
    std::vector<std::pair<fs::path, Vec3>> bodies;
    std::vector<config::ProbeSpec> observers;
    std::size_t segment = 0;  ///< 0 disables the PSD
    std::size_t overlap = 0;
    config::OutputSpec output;
};

inline CurleConfig parse_curle(const json& j, const fs::path& base) {
    config::Reader r;
    config::check_header(j, r, "curle");
    CurleConfig c;
    c.c0 = config::read_physics(j, r, false).c0;
    if (const json* b = r.section(j, "", "bodies")) {
        if (!b->is_array() || b->empty()) r.add("bodies: must be a non-empty array");
        for (std::size_t i = 0; b->is_array() && i < b->size(); ++i) {
            const std::string w = "bodies[" + std::to_string(i) + "]";
            const auto f = r.get<std::string>((*b)[i], w, "force_file");
            const auto p = r.get<Vec3>((*b)[i], w, "body_point");
            if (f) {
                const auto path = config::resolve(base, *f);
                r.check(fs::exists(path), w + ".force_file: " + path.string() + " does not exist");
                c.bodies.push_back({path, p.value_or(Vec3{})});
            }
        }
    }
    if (j.contains("observers")) {
        json wrapped = {{"probes", j.at("observers")}};
        config::Reader sub;
        c.observers = config::read_probes(wrapped, sub);
        for (auto p : sub.problems()) r.add("observers" + p.substr(6));
    }
    r.check(!c.observers.empty(), "observers: at least one observer is required");
    if (j.contains("psd")) {
        c.segment = r.get<std::size_t>(j.at("psd"), "psd", "segment").value_or(0);
        c.overlap = r.get_or<std::size_t>(j.at("psd"), "psd", "overlap", c.segment / 2);
        r.check(c.segment >= 4, "psd.segment: must be >= 4");
        r.check(c.overlap < c.segment, "psd.overlap: must be smaller than psd.segment");
    }
    c.output = config::read_output(j, r, "curle");
    r.finish();
    return c;
}

inline json run_curle(const json& j, const fs::path& base, output::RunDirectory& dir) {
    const auto c = parse_curle(j, base);
    std::vector<curle::ForceHistory> bodies;
    for (const auto& [path, point] : c.bodies) {
        dir.add_input(path);
        bodies.push_back(curle::read_force_csv(path.string(), point));
    }
    json observers = json::object();
    for (const auto& o : c.observers) {
        const auto rec = curle::curle_pressure(bodies, o.position, c.c0);
        std::vector<std::vector<double>> rows;
        double ms = 0.0;
        for (std::size_t k = 0; k < rec.times.size(); ++k) {
            rows.push_back({rec.times[k], rec.pressure[k]});
            ms += rec.pressure[k] * rec.pressure[k];
        }
        dir.write_csv(c.output.name + "_" + o.name + "_pressure.csv", {"time", "pressure"}, rows);
        json jo = {{"position", o.position}, {"rms", std::sqrt(ms / static_cast<double>(rec.times.size()))}};
        if (c.segment > 0) {
            const auto s = curle::psd(rec.pressure, bodies.front().dt(), c.segment, c.overlap);
            std::vector<std::vector<double>> prow;
            std::size_t peak = 1;
            for (std::size_t k = 0; k < s.frequency.size(); ++k) {
                prow.push_back({s.frequency[k], s.density[k]});
                if (k > 0 && s.density[k] > s.density[peak]) peak = k;
            }
            dir.write_csv(c.output.name + "_" + o.name + "_psd.csv", {"frequency", "psd"}, prow);
            jo["peak_frequency"] = s.frequency.size() > 1 ? s.frequency[peak] : 0.0;
            jo["segments"] = s.segments;
        }
        observers[o.name] = jo;
    }
    json report = {{"kind", "curle"}, {"c0", c.c0}, {"bodies", c.bodies.size()}, {"observers", observers}};
    dir.write_json(c.output.name + "_report.json", report);
    return report;
}

// ---------------------------------------------------------------------------
// mesh-gen

/// Writes the acoustic mesh (`<name>.json`, `<name>.vtk`) or, with `fv`, a
/// Cartesian FV mesh file in the donor schema.
inline json mesh_gen(const config::MeshSpec& spec, bool fv, const std::string& name, output::RunDirectory& dir) {
    if (fv) {
        detail::require(!spec.file.has_value(), ErrorCode::invalid_argument, "FV meshes are generated from --box only");
        const auto m = fv::generate_box_fv(spec.lo, spec.hi, spec.divisions, spec.tags);
        fv::write_fv(dir.file(name + ".json").string(), &m, {});
        return {{"kind", "mesh-gen"}, {"fv", true}, {"cells", m.num_cells()}, {"faces", m.faces().size()}};
    }
    const auto mesh = spec.build();
    write_mesh(dir.file(name + ".json").string(), mesh);
    const auto space = build_space(mesh, 1);
    write_vtk(dir.file(name + ".vtk").string(), space, {});
    return {{"kind", "mesh-gen"}, {"fv", false}, {"elements", mesh.num_elements()}, {"vertices", mesh.vertices().size()},
            {"tags", mesh.tags()}};
}

} // namespace aerosem::drivers
