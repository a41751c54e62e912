#pragma once

/// @file output.hpp
/// @brief Output directory bookkeeping: CSV writing, SHA-256 content hashes
/// and the run manifest.
///
/// Numbers are written with "%.17g" so that identical runs give
/// byte-identical files.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "aerosem/error.hpp"

namespace aerosem::output {

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    detail::require(static_cast<bool>(in), ErrorCode::io, "cannot read " + path.string() + " for hashing");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

/// One run's output directory; every file written through it is hashed
/// into manifest.json.
class RunDirectory {
public:
    explicit RunDirectory(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        detail::require(!ec && std::filesystem::is_directory(dir_), ErrorCode::io,
                        "cannot create output directory " + dir_.string());
    }

    const std::filesystem::path& path() const { return dir_; }

    std::filesystem::path file(const std::string& name) {
        files_.push_back(name);
        return dir_ / name;
    }

    void add_input(const std::filesystem::path& p) { inputs_.push_back(p); }

    void write_csv(const std::string& name, const std::vector<std::string>& header,
                   const std::vector<std::vector<double>>& rows) {
        std::ofstream out(file(name));
        detail::require(static_cast<bool>(out), ErrorCode::io, "cannot write " + (dir_ / name).string());
        for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
        out << '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
            out << '\n';
        }
    }

    void write_json(const std::string& name, const nlohmann::json& j) {
        std::ofstream out(file(name));
        detail::require(static_cast<bool>(out), ErrorCode::io, "cannot write " + (dir_ / name).string());
        out << j.dump(2) << '\n';
    }

    /// Writes manifest.json listing every input and output with its hash.
    nlohmann::json write_manifest(const std::string& command, const nlohmann::json& config, std::uint64_t seed) const {
        nlohmann::json m;
        m["tool"] = "aerosem";
        m["version"] = "1";
        m["command"] = command;
        m["seed"] = seed;
        m["config"] = config;
        auto& ins = m["inputs"] = nlohmann::json::array();
        for (const auto& p : inputs_) ins.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
        auto& outs = m["outputs"] = nlohmann::json::array();
        for (const auto& f : files_)
            outs.push_back({{"path", f},
                            {"bytes", std::filesystem::file_size(dir_ / f)},
                            {"sha256", sha256_file(dir_ / f)}});
        std::ofstream out(dir_ / "manifest.json");
        detail::require(static_cast<bool>(out), ErrorCode::io, "cannot write manifest");
        out << m.dump(2) << '\n';
        return m;
    }

    const std::vector<std::string>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
    std::vector<std::filesystem::path> inputs_;
};

} // namespace aerosem::output
