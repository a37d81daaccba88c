// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.
//
// Reference delay-and-sum beamformer. For beam direction theta and an
// element whose offset delay is gamma = delta/c, the echo received at
// beam time t was detected by that element at
//
//   tau(t; theta) = (t + sqrt(t^2 - 4 gamma t sin(theta) + 4 gamma^2)) / 2.
//
// The beamformed line averages all element signals read at their own
// tau, with linear interpolation between samples.

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "subeam/channel_frame.hpp"
#include "subeam/config.hpp"
#include "subeam/errors.hpp"

namespace subeam {

// Detection time tau_m(t; theta) for one element. The discriminant is
// evaluated as a sum of squares via hypot, which keeps it exact for
// gamma = 0 and stable when the two terms nearly cancel.
inline double element_delay(double t, double theta, double gamma) {
    double s = std::sin(theta);
    double c = std::cos(theta);
    return 0.5 * (t + std::hypot(t - 2.0 * gamma * s, 2.0 * gamma * c));
}

// tau_m over a vector of beam times.
inline std::vector<double> delay_map(std::span<const double> times, double theta,
                                     double gamma) {
    std::vector<double> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i)
        out[i] = element_delay(times[i], theta, gamma);
    return out;
}

// Delay-and-sum with linear interpolation. Reads beyond the recorded
// window contribute zero; the two halves of a straddling read are
// dropped independently.
inline BeamformedLine beamform_time(const ChannelFrame& frame, const ArrayGeometry& geom,
                                    const GridSpec& grid) {
    if (frame.num_elements != geom.num_elements())
        throw structural_error("frame has " + std::to_string(frame.num_elements) +
                               " rows but the array has " +
                               std::to_string(geom.num_elements()) + " elements");
    if (frame.num_samples != grid.num_samples)
        throw structural_error("frame has " + std::to_string(frame.num_samples) +
                               " samples per row but the grid expects " +
                               std::to_string(grid.num_samples));

    const std::size_t n_samples = grid.num_samples;
    const std::size_t n_elem = frame.num_elements;
    const double fs = grid.sample_rate;
    const double theta = frame.theta;

    BeamformedLine line = make_frame(1, n_samples, theta, fs);
    for (std::size_t m = 0; m < n_elem; ++m) {
        const double gamma = geom.gamma(m);
        const double* row = frame.row(m);
        double* acc = line.row(0);
        for (std::size_t n = 0; n < n_samples; ++n) {
            double p = element_delay(grid.time(n), theta, gamma) * fs;
            double fl = std::floor(p);
            auto i0 = static_cast<long long>(fl);
            double fr = p - fl;
            double v = 0.0;
            if (i0 >= 0 && i0 < static_cast<long long>(n_samples))
                v += (1.0 - fr) * row[i0];
            if (i0 + 1 >= 0 && i0 + 1 < static_cast<long long>(n_samples))
                v += fr * row[i0 + 1];
            acc[n] += v;
        }
    }
    double scale = 1.0 / static_cast<double>(n_elem);
    for (std::size_t n = 0; n < n_samples; ++n) line.row(0)[n] *= scale;
    return line;
}

} // namespace subeam
