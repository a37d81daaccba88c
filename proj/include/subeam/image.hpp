// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.
//
// Display processing: envelope detection, logarithmic compression to
// 8-bit gray, sector scan conversion, and PGM output.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "subeam/channel_frame.hpp"
#include "subeam/errors.hpp"
#include "subeam/fft.hpp"

namespace subeam {

// Envelope of a real line via the analytic signal: keep the one-sided
// spectrum (doubling strictly positive frequencies), invert, and take
// magnitudes.
inline std::vector<double> envelope(const std::vector<double>& line) {
    const std::size_t n = line.size();
    if (n == 0) return {};
    std::vector<std::complex<double>> spectrum =
        fft::forward(std::vector<std::complex<double>>(line.begin(), line.end()));
    for (std::size_t k = 1; k < n; ++k) {
        if (2 * k < n)
            spectrum[k] *= 2.0;
        else if (2 * k > n)
            spectrum[k] = {0.0, 0.0};
    }
    std::vector<std::complex<double>> analytic = fft::inverse(spectrum);
    std::vector<double> env(n);
    for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(analytic[i]);
    return env;
}

// Normalized root-mean-square error of `test` against `reference`.
inline double nrmse(const std::vector<double>& test, const std::vector<double>& reference) {
    if (test.size() != reference.size())
        throw structural_error("nrmse inputs differ in length");
    double err_sq = 0.0;
    double ref_sq = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const double d = test[i] - reference[i];
        err_sq += d * d;
        ref_sq += reference[i] * reference[i];
    }
    if (ref_sq == 0.0)
        throw structural_error("nrmse reference is identically zero");
    return std::sqrt(err_sq / ref_sq);
}

// Log compression of envelope rows to 8-bit gray. Each value maps to
// 20 log10(e / max) clipped to [-dynamic_range_db, 0], then scales
// linearly to [0, 255] with round-half-up. An all-zero input yields an
// all-zero image.
inline std::vector<std::uint8_t> log_compress(const std::vector<double>& env,
                                              double dynamic_range_db) {
    if (!(dynamic_range_db > 0.0))
        throw config_error("dynamic range: must be positive");
    double peak = 0.0;
    for (double e : env) {
        if (!(e >= 0.0))
            throw structural_error("envelope values must be nonnegative");
        peak = std::max(peak, e);
    }
    std::vector<std::uint8_t> out(env.size(), 0);
    if (peak == 0.0) return out;
    for (std::size_t i = 0; i < env.size(); ++i) {
        double db = env[i] > 0.0 ? 20.0 * std::log10(env[i] / peak)
                                 : -dynamic_range_db;
        db = std::clamp(db, -dynamic_range_db, 0.0);
        const double level = (db + dynamic_range_db) / dynamic_range_db * 255.0;
        out[i] = static_cast<std::uint8_t>(std::floor(level + 0.5));
    }
    return out;
}

// A gray image in row-major order.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
    std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

// Scan conversion of a polar data set (rows: directions, columns:
// range samples) into a Cartesian sector image. The sector apex sits
// at the top center; x spans [-r_max sin(theta_max), +r_max
// sin(theta_max)] and z spans [0, r_max]. Pixels outside the sector
// are 0. Lookup is bilinear in (range, angle).
inline GrayImage scan_convert(const std::vector<std::vector<std::uint8_t>>& polar_rows,
                              const std::vector<double>& directions, std::size_t out_width,
                              std::size_t out_height) {
    if (polar_rows.size() < 2)
        throw config_error("scan conversion requires at least two directions");
    if (polar_rows.size() != directions.size())
        throw structural_error("direction list does not match the polar row count");
    if (out_width < 2 || out_height < 2)
        throw config_error("output image must be at least 2x2");
    const std::size_t n_range = polar_rows.front().size();
    if (n_range < 2)
        throw config_error("scan conversion requires at least two range samples");
    for (const auto& row : polar_rows)
        if (row.size() != n_range)
            throw structural_error("polar rows differ in length");
    for (std::size_t i = 1; i < directions.size(); ++i)
        if (directions[i] <= directions[i - 1])
            throw config_error("directions must be strictly increasing");

    const double theta_min = directions.front();
    const double theta_max = directions.back();
    const double half_span = std::max(std::abs(theta_min), std::abs(theta_max));
    const double x_half = std::sin(half_span);

    GrayImage img;
    img.width = out_width;
    img.height = out_height;
    img.pixels.assign(out_width * out_height, 0);

    for (std::size_t row = 0; row < out_height; ++row) {
        // z in (0, 1]: skip the apex row itself to keep atan2 defined.
        const double z = (static_cast<double>(row) + 0.5) / static_cast<double>(out_height);
        for (std::size_t col = 0; col < out_width; ++col) {
            const double x = (2.0 * (static_cast<double>(col) + 0.5) /
                                  static_cast<double>(out_width) -
                              1.0) *
                             x_half;
            const double r = std::hypot(x, z);
            const double theta = std::atan2(x, z);
            if (r > 1.0 || theta < theta_min || theta > theta_max) continue;

            // Fractional angular position.
            const auto hi_it =
                std::upper_bound(directions.begin(), directions.end(), theta);
            std::size_t hi = static_cast<std::size_t>(hi_it - directions.begin());
            hi = std::clamp<std::size_t>(hi, 1, directions.size() - 1);
            const std::size_t lo = hi - 1;
            const double t_frac =
                (theta - directions[lo]) / (directions[hi] - directions[lo]);

            // Fractional range position.
            const double p = r * static_cast<double>(n_range - 1);
            const std::size_t r0 = std::min(static_cast<std::size_t>(p), n_range - 2);
            const double r_frac = p - static_cast<double>(r0);

            const double v00 = polar_rows[lo][r0];
            const double v01 = polar_rows[lo][r0 + 1];
            const double v10 = polar_rows[hi][r0];
            const double v11 = polar_rows[hi][r0 + 1];
            const double v = (1.0 - t_frac) * ((1.0 - r_frac) * v00 + r_frac * v01) +
                             t_frac * ((1.0 - r_frac) * v10 + r_frac * v11);
            img.at(row, col) = static_cast<std::uint8_t>(std::floor(v + 0.5));
        }
    }
    return img;
}

// Binary PGM (P5, maxval 255).
inline void write_pgm(const std::string& path, const GrayImage& img) {
    if (img.width == 0 || img.height == 0 || img.pixels.size() != img.width * img.height)
        throw structural_error("image dimensions are inconsistent");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw io_error("cannot open '" + path + "' for writing");
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out)
        throw io_error("failed while writing '" + path + "'");
}

} // namespace subeam
