// aerosem command-line front end.
//
//   aerosem <mms|solve|project|fv-source|curle|mesh-gen> --config FILE --out DIR [--seed N]
//
// Success prints a JSON summary on stdout and exits 0. Any failure prints
// {"status": "error", "error": {...}} on stderr and exits 1 (2 for usage).

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aerosem/config.hpp"
#include "aerosem/drivers.hpp"
#include "aerosem/output.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aerosem;

namespace {

int fail(const std::string& code, const std::string& message, const std::vector<std::string>& problems = {},
         int exit_code = 1) {
    json e = {{"code", code}, {"message", message}};
    if (!problems.empty()) e["problems"] = problems;
    std::cerr << json{{"status", "error"}, {"error", e}}.dump() << '\n';
    return exit_code;
}

std::vector<double> parse_list(const std::string& s, std::size_t n, const char* what) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw Error(ErrorCode::invalid_argument, std::string(what) + ": malformed number \"" + tok + "\"");
        }
    }
    detail::require(v.size() == n, ErrorCode::invalid_argument,
                    std::string(what) + ": expected " + std::to_string(n) + " comma-separated values");
    return v;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"aerosem: spectral-element acoustics and aeroacoustic source transfer"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", config_path, "run configuration (JSON)");
        if (needs_config) opt->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "seed for randomized inputs, recorded in the manifest")->capture_default_str();
    };
    auto* mms = app.add_subcommand("mms", "manufactured-solution convergence study");
    auto* solve = app.add_subcommand("solve", "acoustic wave solve with probes and snapshots");
    auto* project = app.add_subcommand("project", "L2 projection of FV fields onto the spectral space");
    auto* fvsrc = app.add_subcommand("fv-source", "Lighthill source from FV velocity fields");
    auto* curle = app.add_subcommand("curle", "compact Curle observer pressure and spectra");
    auto* meshgen = app.add_subcommand("mesh-gen", "generate a box mesh");
    for (auto* s : {mms, solve, project, fvsrc, curle}) add_common(s, true);
    add_common(meshgen, false);

    std::string box, div, name = "mesh";
    std::vector<std::string> tag_args;
    bool fv_mesh = false;
    meshgen->add_option("--box", box, "x0,y0,z0,x1,y1,z1");
    meshgen->add_option("--div", div, "nx,ny,nz");
    meshgen->add_option("--tag", tag_args, "face=name for xmin|xmax|ymin|ymax|zmin|zmax (repeatable)");
    meshgen->add_option("--name", name, "output file stem")->capture_default_str();
    meshgen->add_flag("--fv", fv_mesh, "write a finite-volume donor mesh instead");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), {}, 2);
    }

    try {
        json cfg = json::object();
        // relative paths inside a configuration refer to the working directory
        const fs::path base = fs::current_path();
        if (!config_path.empty()) cfg = config::load_json(config_path);
        output::RunDirectory dir(out_dir);
        if (!config_path.empty()) dir.add_input(config_path);

        std::string command;
        json report;
        if (*mms) {
            command = "mms";
            report = drivers::run_mms(cfg, dir);
        } else if (*solve) {
            command = "solve";
            report = drivers::run_solve(cfg, base, seed, dir);
        } else if (*project) {
            command = "project";
            report = drivers::run_project(cfg, base, seed, dir);
        } else if (*fvsrc) {
            command = "fv-source";
            report = drivers::run_fv_source(cfg, base, dir);
        } else if (*curle) {
            command = "curle";
            report = drivers::run_curle(cfg, base, dir);
        } else {
            command = "mesh-gen";
            config::MeshSpec spec;
            bool fv = fv_mesh;
            if (!config_path.empty()) {
                config::Reader r;
                config::check_header(cfg, r, "mesh-gen");
                if (const json* m = r.section(cfg, "", "mesh")) spec = config::read_mesh_spec(*m, "mesh", r, base);
                fv = fv || r.get_or(cfg, "", "fv", false);
                name = r.get_or<std::string>(cfg, "", "name", name);
                r.finish();
            } else {
                detail::require(!box.empty() && !div.empty(), ErrorCode::invalid_argument,
                                "mesh-gen needs --config or both --box and --div");
                const auto b = parse_list(box, 6, "--box");
                const auto d = parse_list(div, 3, "--div");
                spec.lo = {b[0], b[1], b[2]};
                spec.hi = {b[3], b[4], b[5]};
                for (int a = 0; a < 3; ++a) {
                    detail::require(d[a] >= 1 && d[a] == std::floor(d[a]), ErrorCode::invalid_argument,
                                    "--div: entries must be positive integers");
                    spec.divisions[a] = static_cast<int>(d[a]);
                }
                const auto faces = default_box_tags();
                for (const auto& t : tag_args) {
                    const auto eq = t.find('=');
                    const auto it = std::find(faces.begin(), faces.end(), t.substr(0, eq));
                    detail::require(eq != std::string::npos && it != faces.end() && eq + 1 < t.size(),
                                    ErrorCode::invalid_argument, "--tag: expected face=name, got \"" + t + "\"");
                    spec.tags[static_cast<std::size_t>(it - faces.begin())] = t.substr(eq + 1);
                }
            }
            report = drivers::mesh_gen(spec, fv, name, dir);
            cfg = {{"mesh", {{"lo", spec.lo}, {"hi", spec.hi}, {"divisions", spec.divisions}}}, {"fv", fv}};
        }
        dir.write_manifest(command, cfg, seed);
        std::cout << json{{"status", "ok"}, {"command", command}, {"out", dir.path().string()},
                          {"files", dir.files()}, {"report", report}}
                         .dump()
                  << '\n';
        return 0;
    } catch (const config::ConfigError& e) {
        return fail(to_string(e.code()), e.what(), e.problems());
    } catch (const Error& e) {
        return fail(to_string(e.code()), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
}
