// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.
//
// Channel-data simulator. Each scatterer at two-way reference delay t_l
// along the beam contributes to element m a pulse replica centered at
// tau_m(t_l; theta), the same delay geometry the beamformer inverts.
// Pulse values at fractional sample times come from the analytic pulse
// expression, so the simulator adds no interpolation error of its own.

#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "subeam/channel_frame.hpp"
#include "subeam/config.hpp"
#include "subeam/errors.hpp"
#include "subeam/phantom.hpp"
#include "subeam/pulse.hpp"
#include "subeam/time_beamform.hpp"

namespace subeam {

struct SimulateOptions {
    // Scale each replica by t_l / tau_m, a normalized 1/distance
    // spreading factor that is exactly 1 at the reference element.
    bool spreading = false;

    // Additive white Gaussian channel noise. NaN disables it. The noise
    // std is signal_rms * 10^(-snr_db/20), drawn with noise_seed.
    double noise_snr_db = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t noise_seed = 0;
};

inline ChannelFrame simulate_channels(const Phantom& phantom, const ArrayGeometry& geom,
                                      const ImagingConfig& cfg, double theta,
                                      const SimulateOptions& options = {}) {
    validate_geometry(geom);
    validate_imaging(cfg);
    const GridSpec grid = derive_grid(cfg, geom);
    const PulseModel pulse = make_pulse(cfg);

    for (std::size_t l = 0; l < phantom.scatterers.size(); ++l) {
        double t = phantom.scatterers[l].delay;
        if (!(t > 0.0 && t < grid.duration))
            throw config_error("phantom scatterer " + std::to_string(l) +
                               " has delay outside the time window (0, T)");
        if (!std::isfinite(phantom.scatterers[l].amplitude))
            throw config_error("phantom scatterer " + std::to_string(l) +
                               " has a non-finite amplitude");
    }

    const std::size_t n_samples = grid.num_samples;
    const double fs = grid.sample_rate;
    const double halfwidth = pulse.support_halfwidth();
    ChannelFrame frame = make_frame(geom.num_elements(), n_samples, theta, fs);

    for (std::size_t m = 0; m < geom.num_elements(); ++m) {
        const double gamma = geom.gamma(m);
        double* row = frame.row(m);
        for (const Scatterer& sc : phantom.scatterers) {
            const double center = element_delay(sc.delay, theta, gamma);
            double amp = sc.amplitude;
            if (options.spreading) amp *= sc.delay / center;
            auto first = static_cast<long long>(std::ceil((center - halfwidth) * fs));
            auto last = static_cast<long long>(std::floor((center + halfwidth) * fs));
            if (first < 0) first = 0;
            if (last >= static_cast<long long>(n_samples))
                last = static_cast<long long>(n_samples) - 1;
            for (long long n = first; n <= last; ++n)
                row[n] += amp * pulse.value(static_cast<double>(n) / fs - center);
        }
    }

    if (!std::isnan(options.noise_snr_db)) {
        double sum_sq = 0.0;
        for (double v : frame.samples) sum_sq += v * v;
        double rms = std::sqrt(sum_sq / static_cast<double>(frame.samples.size()));
        double sigma = rms * std::pow(10.0, -options.noise_snr_db / 20.0);
        DeterministicRng rng(options.noise_seed);
        for (double& v : frame.samples) v += sigma * rng.normal();
    }

    return frame;
}

} // namespace subeam
