// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.
//
// Transmitted pulse model h(t) = g(t) cos(2 pi f0 t) with a Gaussian
// envelope g. The envelope is parameterized so that envelope_bandwidth
// covers the spectral support of g: sigma_f = bandwidth / 5.5, which
// puts ~99.99% of the envelope's spectral energy inside f0 +- bw/2.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "subeam/config.hpp"
#include "subeam/errors.hpp"
#include "subeam/fft.hpp"

namespace subeam {

struct PulseModel {
    double carrier_f0 = 3.1e6;         // [Hz]
    double envelope_bandwidth = 2.0e6; // [Hz]

    double sigma_f() const { return envelope_bandwidth / 5.5; }
    double sigma_t() const { return 1.0 / (2.0 * std::numbers::pi * sigma_f()); }

    // The envelope is cut to zero beyond 5 sigma; amplitudes there are
    // below 4e-6 of the peak.
    double support_halfwidth() const { return 5.0 * sigma_t(); }

    // Analytic pulse value at time t, valid at fractional sample times.
    double value(double t) const {
        double st = sigma_t();
        if (std::abs(t) > support_halfwidth()) return 0.0;
        double g = std::exp(-(t * t) / (2.0 * st * st));
        return g * std::cos(2.0 * std::numbers::pi * carrier_f0 * t);
    }

    // Envelope alone, for ground-truth comparisons.
    double envelope_value(double t) const {
        double st = sigma_t();
        if (std::abs(t) > support_halfwidth()) return 0.0;
        return std::exp(-(t * t) / (2.0 * st * st));
    }
};

inline PulseModel make_pulse(const ImagingConfig& cfg) {
    PulseModel p;
    p.carrier_f0 = cfg.carrier_f0;
    p.envelope_bandwidth = cfg.envelope_bandwidth;
    if (p.carrier_f0 + p.envelope_bandwidth / 2.0 >= cfg.sample_rate_fs / 2.0)
        throw config_error("carrier_f0: pulse passband must lie below Nyquist");
    return p;
}

struct SampledPulse {
    std::vector<double> h;                    // h[n], length N
    std::vector<std::complex<double>> h_dft;  // length-N DFT of h
};

// Samples the pulse on the N-point grid, wrapping times into
// [-P/2, P/2) so the pulse is centered at sample 0 with its left tail
// at the end of the window. This makes h[(n - q) mod N] the sampled
// pulse centered at sample q, consistent with DFT shift arithmetic.
inline SampledPulse sample_pulse(const PulseModel& pulse, const GridSpec& grid) {
    SampledPulse out;
    const std::size_t n_samples = grid.num_samples;
    const double period = grid.period();
    out.h.resize(n_samples);
    for (std::size_t n = 0; n < n_samples; ++n) {
        double t = grid.time(n);
        if (t >= period / 2.0) t -= period;
        out.h[n] = pulse.value(t);
    }
    out.h_dft = fft::forward_real(out.h);
    return out;
}

} // namespace subeam
