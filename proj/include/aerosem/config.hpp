#pragma once

/// @file config.hpp
/// @brief Run configuration (JSON, "version": "1") for the batch drivers.
///
/// Every problem found while reading a configuration is collected and
/// reported together through ConfigError. Physical constants (rho0, c0, Z)
/// have no defaults; numerical settings do and are listed in README.md.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "aerosem/error.hpp"
#include "aerosem/geometry.hpp"
#include "aerosem/mesh.hpp"
#include "aerosem/mesh_io.hpp"
#include "aerosem/newmark.hpp"

namespace aerosem::config {

using nlohmann::json;

class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : Error(ErrorCode::schema, summary(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const { return problems_; }

private:
    static std::string summary(const std::vector<std::string>& p) {
        return "invalid configuration (" + std::to_string(p.size()) + (p.size() == 1 ? " problem)" : " problems)");
    }
    std::vector<std::string> problems_;
};

/// Field accessors that record problems instead of throwing.
class Reader {
public:
    void add(std::string problem) { problems_.push_back(std::move(problem)); }
    void check(bool ok, const std::string& problem) {
        if (!ok) add(problem);
    }
    bool ok() const { return problems_.empty(); }
    const std::vector<std::string>& problems() const { return problems_; }
    void finish() const {
        if (!problems_.empty()) throw ConfigError(problems_);
    }

    const json* section(const json& j, const std::string& where, const char* key, bool required = true) {
        if (!j.is_object() || !j.contains(key)) {
            if (required) add(join(where, key) + ": missing");
            return nullptr;
        }
        return &j.at(key);
    }

    template <class T>
    std::optional<T> get(const json& j, const std::string& where, const char* key) {
        const json* v = section(j, where, key);
        if (!v) return std::nullopt;
        return convert<T>(*v, join(where, key));
    }

    template <class T>
    T get_or(const json& j, const std::string& where, const char* key, T fallback) {
        if (!j.is_object() || !j.contains(key)) return fallback;
        return convert<T>(j.at(key), join(where, key)).value_or(fallback);
    }

    template <class T>
    std::optional<T> convert(const json& v, const std::string& where) {
        try {
            return v.get<T>();
        } catch (const json::exception&) {
            add(where + ": wrong type (got " + std::string(v.type_name()) + ")");
            return std::nullopt;
        }
    }

    static std::string join(const std::string& where, const char* key) {
        return where.empty() ? std::string(key) : where + "." + key;
    }

private:
    std::vector<std::string> problems_;
};

inline json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorCode::io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::schema, path.string() + ": " + e.what());
    }
}

/// Reads `version` and `kind`; the kind must match `expected` when given.
inline std::string check_header(const json& j, Reader& r, const std::string& expected = "") {
    if (!j.is_object()) {
        r.add("configuration must be a JSON object");
        return "";
    }
    const auto v = r.get<std::string>(j, "", "version");
    if (v && *v != "1") r.add("version: unsupported \"" + *v + "\" (expected \"1\")");
    const auto k = r.get<std::string>(j, "", "kind");
    if (k && !expected.empty() && *k != expected) r.add("kind: \"" + *k + "\" does not match subcommand " + expected);
    return k.value_or("");
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
}

// ---------------------------------------------------------------------------

struct MeshSpec {
    std::optional<std::filesystem::path> file;
    Vec3 lo{}, hi{};
    std::array<int, 3> divisions{1, 1, 1};
    BoxTags tags = default_box_tags();

    HexMesh build() const { return file ? read_mesh(file->string()) : generate_box_mesh(lo, hi, divisions, tags); }
};

/// {"file": path} or {"box": {"lo", "hi", "divisions" | "spacing", "tags"?}}.
inline MeshSpec read_mesh_spec(const json& j, const std::string& where, Reader& r, const std::filesystem::path& base) {
    MeshSpec m;
    if (j.is_object() && j.contains("file")) {
        if (auto f = r.get<std::string>(j, where, "file")) {
            m.file = resolve(base, *f);
            r.check(std::filesystem::exists(*m.file), where + ".file: " + m.file->string() + " does not exist");
        }
        return m;
    }
    const json* box = r.section(j, where, "box");
    if (!box) return m;
    const std::string w = where + ".box";
    m.lo = r.get<Vec3>(*box, w, "lo").value_or(Vec3{});
    m.hi = r.get<Vec3>(*box, w, "hi").value_or(Vec3{1, 1, 1});
    for (int a = 0; a < 3; ++a) r.check(m.hi[a] > m.lo[a], w + ": hi must exceed lo on every axis");
    if (box->contains("divisions")) {
        m.divisions = r.get<std::array<int, 3>>(*box, w, "divisions").value_or(m.divisions);
        for (int d : m.divisions) r.check(d >= 1, w + ".divisions: entries must be >= 1");
    } else if (box->contains("spacing")) {
        const double h = r.get<double>(*box, w, "spacing").value_or(0.0);
        if (h > 0.0)
            for (int a = 0; a < 3; ++a)
                m.divisions[a] = std::max(1, static_cast<int>(std::lround((m.hi[a] - m.lo[a]) / h)));
        else
            r.add(w + ".spacing: must be > 0");
    } else {
        r.add(w + ": needs \"divisions\" or \"spacing\"");
    }
    if (box->contains("tags")) {
        const auto t = r.get<std::map<std::string, std::string>>(*box, w, "tags");
        if (t) {
            const auto names = default_box_tags();
            for (const auto& [face, tag] : *t) {
                const auto it = std::find(names.begin(), names.end(), face);
                if (it == names.end())
                    r.add(w + ".tags: unknown box face \"" + face + "\"");
                else
                    m.tags[static_cast<std::size_t>(it - names.begin())] = tag;
            }
        }
    }
    return m;
}

struct Physics {
    double rho0 = 0.0;  ///< kg/m^3
    double c0 = 0.0;    ///< m/s
};

inline Physics read_physics(const json& j, Reader& r, bool need_rho0, bool need_c0 = true) {
    Physics p;
    const json* s = r.section(j, "", "physics");
    if (!s) return p;
    if (need_c0 || s->contains("c0")) {
        if (auto c = r.get<double>(*s, "physics", "c0")) {
            p.c0 = *c;
            r.check(p.c0 > 0.0, "physics.c0: must be > 0");
        }
    }
    if (need_rho0 || s->contains("rho0")) {
        if (auto rho = r.get<double>(*s, "physics", "rho0")) {
            p.rho0 = *rho;
            r.check(p.rho0 > 0.0, "physics.rho0: must be > 0");
        }
    }
    return p;
}

inline NewmarkConfig read_time(const json& j, Reader& r) {
    NewmarkConfig c;
    const json* s = r.section(j, "", "time");
    if (!s) return c;
    c.dt = r.get<double>(*s, "time", "dt").value_or(0.0);
    c.t_final = r.get<double>(*s, "time", "t_final").value_or(0.0);
    c.beta = r.get_or(*s, "time", "beta", 0.25);
    c.gamma = r.get_or(*s, "time", "gamma", 0.5);
    c.cg_tol = r.get_or(*s, "time", "cg_tol", 1e-10);
    c.cg_max_iter = r.get_or(*s, "time", "cg_max_iter", 1000);
    try {
        c.validate();
    } catch (const Error& e) {
        r.add(std::string("time: ") + e.what());
    }
    return c;
}

struct BoundarySpec {
    enum class Type { impedance, rigid, neumann } type = Type::rigid;
    std::set<std::string> tags;
    double Z = 0.0;      ///< Pa s/m
    double value = 0.0;  ///< constant flux d rho / d n
};

inline std::vector<BoundarySpec> read_boundaries(const json& j, Reader& r) {
    std::vector<BoundarySpec> out;
    if (!j.contains("boundary")) return out;
    const json& b = j.at("boundary");
    if (!b.is_array()) {
        r.add("boundary: must be an array");
        return out;
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
        const std::string w = "boundary[" + std::to_string(i) + "]";
        BoundarySpec s;
        if (auto t = r.get<std::set<std::string>>(b[i], w, "tags")) s.tags = *t;
        if (b[i].is_object() && b[i].contains("tags")) r.check(!s.tags.empty(), w + ".tags: must not be empty");
        const auto type = r.get<std::string>(b[i], w, "type").value_or("");
        if (type == "impedance") {
            s.type = BoundarySpec::Type::impedance;
            if (auto z = r.get<double>(b[i], w, "Z")) {
                s.Z = *z;
                r.check(s.Z > 0.0, w + ".Z: must be > 0");
            }
        } else if (type == "rigid") {
            s.type = BoundarySpec::Type::rigid;
        } else if (type == "neumann") {
            s.type = BoundarySpec::Type::neumann;
            s.value = r.get<double>(b[i], w, "value").value_or(0.0);
        } else if (!type.empty()) {
            r.add(w + ".type: unknown \"" + type + "\" (impedance | rigid | neumann)");
        }
        out.push_back(std::move(s));
    }
    return out;
}

struct SourceSpec {
    enum class Type { none, monopole, projected } type = Type::none;
    Vec3 position{};
    double f0 = 0.0;         ///< Hz
    double amplitude = 1.0;
    std::filesystem::path file;
};

inline SourceSpec read_source(const json& j, Reader& r, const std::filesystem::path& base) {
    SourceSpec s;
    const json* src = r.section(j, "", "source", false);
    if (!src) return s;
    const auto type = r.get<std::string>(*src, "source", "type").value_or("");
    if (type == "none") {
        s.type = SourceSpec::Type::none;
    } else if (type == "monopole") {
        s.type = SourceSpec::Type::monopole;
        s.position = r.get<Vec3>(*src, "source", "position").value_or(Vec3{});
        s.f0 = r.get<double>(*src, "source", "f0").value_or(0.0);
        r.check(s.f0 > 0.0, "source.f0: must be > 0");
        s.amplitude = r.get_or(*src, "source", "amplitude", 1.0);
    } else if (type == "projected") {
        s.type = SourceSpec::Type::projected;
        if (auto f = r.get<std::string>(*src, "source", "file")) {
            s.file = resolve(base, *f);
            r.check(std::filesystem::exists(s.file), "source.file: " + s.file.string() + " does not exist");
        }
    } else if (!type.empty()) {
        r.add("source.type: unknown \"" + type + "\" (none | monopole | projected)");
    }
    return s;
}

struct InitialSpec {
    enum class Type { zero, pulse, random } type = Type::zero;
    Vec3 center{};
    double sigma = 0.0;
    double amplitude = 0.0;
    std::optional<Vec3> direction;  ///< travelling pulse when set
    bool planar = false;            ///< Gaussian in the coordinate along `direction` only
};

inline InitialSpec read_initial(const json& j, Reader& r) {
    InitialSpec s;
    const json* ini = r.section(j, "", "initial", false);
    if (!ini) return s;
    const auto type = r.get<std::string>(*ini, "initial", "type").value_or("");
    if (type == "zero") {
        s.type = InitialSpec::Type::zero;
    } else if (type == "pulse") {
        s.type = InitialSpec::Type::pulse;
        s.center = r.get<Vec3>(*ini, "initial", "center").value_or(Vec3{});
        s.sigma = r.get<double>(*ini, "initial", "sigma").value_or(0.0);
        r.check(s.sigma > 0.0, "initial.sigma: must be > 0");
        s.amplitude = r.get<double>(*ini, "initial", "amplitude").value_or(0.0);
        if (ini->contains("direction")) {
            if (auto d = r.get<Vec3>(*ini, "initial", "direction")) {
                if (norm(*d) > 0.0)
                    s.direction = (1.0 / norm(*d)) * *d;
                else
                    r.add("initial.direction: must be non-zero");
            }
        }
        s.planar = r.get_or(*ini, "initial", "planar", false);
        r.check(!s.planar || s.direction.has_value(), "initial.planar: requires a direction");
    } else if (type == "random") {
        s.type = InitialSpec::Type::random;
        s.amplitude = r.get<double>(*ini, "initial", "amplitude").value_or(0.0);
    } else if (!type.empty()) {
        r.add("initial.type: unknown \"" + type + "\" (zero | pulse | random)");
    }
    return s;
}

struct ProbeSpec {
    std::string name;
    Vec3 position{};
};

inline std::vector<ProbeSpec> read_probes(const json& j, Reader& r) {
    std::vector<ProbeSpec> out;
    if (!j.contains("probes")) return out;
    const json& p = j.at("probes");
    if (!p.is_array()) {
        r.add("probes: must be an array");
        return out;
    }
    std::set<std::string> names;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const std::string w = "probes[" + std::to_string(i) + "]";
        ProbeSpec s;
        s.name = r.get<std::string>(p[i], w, "name").value_or("");
        s.position = r.get<Vec3>(p[i], w, "position").value_or(Vec3{});
        r.check(!s.name.empty() && s.name.find(',') == std::string::npos, w + ".name: must be non-empty, no commas");
        r.check(names.insert(s.name).second, w + ".name: duplicate \"" + s.name + "\"");
        out.push_back(std::move(s));
    }
    return out;
}

struct OutputSpec {
    std::string name = "run";
    int snapshot_stride = 0;  ///< VTK every n steps; 0 disables
};

inline OutputSpec read_output(const json& j, Reader& r, const std::string& default_name) {
    OutputSpec o;
    o.name = default_name;
    const json* s = r.section(j, "", "output", false);
    if (!s) return o;
    o.name = r.get_or(*s, "output", "name", default_name);
    r.check(!o.name.empty() && o.name.find('/') == std::string::npos, "output.name: must be a plain file stem");
    o.snapshot_stride = r.get_or(*s, "output", "snapshot_stride", 0);
    r.check(o.snapshot_stride >= 0, "output.snapshot_stride: must be >= 0");
    return o;
}

} // namespace aerosem::config
