#pragma once

/// @file curle.hpp
/// @brief Compact-source Curle observer and spectral post-processing.
///
/// p(x, t) = (1/4 pi) (r_vec / r^2) . (F / r + dF/dt / c0), r_vec = x - y_body.
/// Retarded times and the volume term are not evaluated.

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <fftw3.h>

#include "aerosem/error.hpp"
#include "aerosem/geometry.hpp"

namespace aerosem::curle {

struct ForceHistory {
    std::vector<double> times;
    std::vector<Vec3> forces;
    Vec3 body_point{};

    void validate() const {
        detail::require(times.size() == forces.size(), ErrorCode::invalid_argument, "force history: length mismatch");
        detail::require(times.size() >= 3, ErrorCode::invalid_argument, "force history needs at least 3 samples");
        const double dt = times[1] - times[0];
        detail::require(dt > 0.0, ErrorCode::invalid_argument, "force history: times must increase");
        for (std::size_t k = 1; k < times.size(); ++k)
            detail::require(std::abs(times[k] - times[k - 1] - dt) <= 1e-6 * dt, ErrorCode::invalid_argument,
                            "force history: non-uniform time step at sample " + std::to_string(k));
        for (std::size_t k = 0; k < forces.size(); ++k)
            detail::require(is_finite(forces[k]) && std::isfinite(times[k]), ErrorCode::non_finite,
                            "force history: non-finite sample " + std::to_string(k));
    }

    double dt() const { return times[1] - times[0]; }
};

struct ObserverRecord {
    Vec3 position{};
    std::vector<double> times;
    std::vector<double> pressure;
};

/// dF/dt by second-order central differences, one-sided second order at the ends.
inline std::vector<Vec3> force_derivative(const ForceHistory& h) {
    const auto n = h.forces.size();
    const double dt = h.dt();
    std::vector<Vec3> d(n);
    const auto& F = h.forces;
    for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (0.5 / dt) * (F[k + 1] - F[k - 1]);
    d[0] = (1.0 / (2 * dt)) * (-3.0 * F[0] + 4.0 * F[1] - 1.0 * F[2]);
    d[n - 1] = (1.0 / (2 * dt)) * (3.0 * F[n - 1] - 4.0 * F[n - 2] + 1.0 * F[n - 3]);
    return d;
}

inline ObserverRecord curle_pressure(const ForceHistory& h, const Vec3& observer, double c0) {
    h.validate();
    detail::require(c0 > 0.0, ErrorCode::invalid_argument, "c0 must be > 0");
    const Vec3 rv = observer - h.body_point;
    const double r = norm(rv);
    detail::require(r > 0.0, ErrorCode::invalid_argument, "observer coincides with the body reference point");
    const auto dF = force_derivative(h);
    ObserverRecord out{observer, h.times, std::vector<double>(h.times.size())};
    const double pre = 1.0 / (4.0 * std::numbers::pi * r * r);
    for (std::size_t k = 0; k < h.times.size(); ++k)
        out.pressure[k] = pre * dot(rv, (1.0 / r) * h.forces[k] + (1.0 / c0) * dF[k]);
    return out;
}

/// Sum of the contributions of several bodies sampled on the same time grid.
inline ObserverRecord curle_pressure(const std::vector<ForceHistory>& bodies, const Vec3& observer, double c0) {
    detail::require(!bodies.empty(), ErrorCode::invalid_argument, "no force histories given");
    auto total = curle_pressure(bodies.front(), observer, c0);
    for (std::size_t b = 1; b < bodies.size(); ++b) {
        detail::require(bodies[b].times == bodies.front().times, ErrorCode::invalid_argument,
                        "force histories must share one time grid");
        const auto p = curle_pressure(bodies[b], observer, c0);
        for (std::size_t k = 0; k < p.pressure.size(); ++k) total.pressure[k] += p.pressure[k];
    }
    return total;
}

struct SurfaceSample {
    double area = 0.0;
    Vec3 normal{};
    double pressure = 0.0;
};

struct SurfaceForce {
    Vec3 force{};
    double closure_residual = 0.0;  ///< |sum area n| / sum area
    bool open_surface = false;      ///< residual above 1%
};

inline SurfaceForce integrate_surface_force(const std::vector<SurfaceSample>& samples) {
    SurfaceForce out;
    Vec3 closure{};
    double area = 0.0;
    for (const auto& s : samples) {
        out.force += (s.pressure * s.area) * s.normal;
        closure += s.area * s.normal;
        area += s.area;
    }
    out.closure_residual = area > 0.0 ? norm(closure) / area : 0.0;
    out.open_surface = out.closure_residual > 0.01;
    return out;
}

struct Spectrum {
    std::vector<double> frequency;  ///< Hz
    std::vector<double> density;    ///< units^2 / Hz, one-sided
    double df = 0.0;
    int segments = 0;
};

/// Welch estimate with a Hann window; each segment has its mean removed.
inline Spectrum psd(const std::vector<double>& x, double dt, std::size_t segment, std::size_t overlap) {
    detail::require(dt > 0.0, ErrorCode::invalid_argument, "sampling interval must be > 0");
    detail::require(segment >= 4 && segment <= x.size(), ErrorCode::invalid_argument,
                    "series too short for the requested segment length");
    detail::require(overlap < segment, ErrorCode::invalid_argument, "overlap must be smaller than the segment");
    const std::size_t step = segment - overlap;
    const std::size_t nf = segment / 2 + 1;
    std::vector<double> win(segment);
    double wss = 0.0;
    for (std::size_t i = 0; i < segment; ++i) {
        win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(segment));
        wss += win[i] * win[i];
    }
    std::vector<double> in(segment);
    std::vector<std::complex<double>> spec(nf);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(segment), in.data(),
                                          reinterpret_cast<fftw_complex*>(spec.data()), FFTW_ESTIMATE);
    Spectrum out;
    out.df = 1.0 / (dt * static_cast<double>(segment));
    out.density.assign(nf, 0.0);
    for (std::size_t start = 0; start + segment <= x.size(); start += step) {
        double mean = 0.0;
        for (std::size_t i = 0; i < segment; ++i) mean += x[start + i];
        mean /= static_cast<double>(segment);
        for (std::size_t i = 0; i < segment; ++i) in[i] = (x[start + i] - mean) * win[i];
        fftw_execute(plan);
        for (std::size_t k = 0; k < nf; ++k) {
            double p = std::norm(spec[k]) * dt / wss;
            if (k != 0 && !(segment % 2 == 0 && k == nf - 1)) p *= 2.0;
            out.density[k] += p;
        }
        ++out.segments;
    }
    fftw_destroy_plan(plan);
    for (double& v : out.density) v /= out.segments;
    out.frequency.resize(nf);
    for (std::size_t k = 0; k < nf; ++k) out.frequency[k] = static_cast<double>(k) * out.df;
    return out;
}

/// CSV with header `time,Fx,Fy,Fz`.
inline ForceHistory read_force_csv(const std::string& path, const Vec3& body_point) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorCode::io, "cannot open force history " + path);
    ForceHistory h;
    h.body_point = body_point;
    std::string line;
    std::getline(in, line);
    detail::require(line.rfind("time,Fx,Fy,Fz", 0) == 0, ErrorCode::schema,
                    path + ":1: expected header 'time,Fx,Fy,Fz'");
    for (int ln = 2; std::getline(in, line); ++ln) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        try {
            while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw Error(ErrorCode::schema, path + ":" + std::to_string(ln) + ": malformed number");
        }
        detail::require(v.size() == 4, ErrorCode::schema, path + ":" + std::to_string(ln) + ": expected 4 columns");
        h.times.push_back(v[0]);
        h.forces.push_back({v[1], v[2], v[3]});
    }
    h.validate();
    return h;
}

} // namespace aerosem::curle
