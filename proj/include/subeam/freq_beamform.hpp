// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.
//
// Frequency-domain beamforming: selects the pulse band kappa, computes
// per-channel DFT coefficients on the needed bins nu, applies the
// kernel table to get beamformed coefficients c_k on kappa, and
// synthesizes the real line by conjugate-symmetric inverse DFT.

#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "subeam/channel_frame.hpp"
#include "subeam/config.hpp"
#include "subeam/errors.hpp"
#include "subeam/fft.hpp"
#include "subeam/freq_kernel.hpp"

namespace subeam {

// Selects the contiguous one-sided band where the pulse spectrum is
// significant: all bins with |h_k| >= threshold * max, grown outward
// (larger neighbor first) until the band holds at least energy_frac of
// the one-sided pulse energy.
inline IndexBand band_select(const std::vector<std::complex<double>>& pulse_dft,
                             double threshold = 0.05, double energy_frac = 0.999) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw config_error("band threshold: must lie strictly between 0 and 1");
    if (pulse_dft.empty())
        throw config_error("band selection: empty pulse spectrum");
    const std::size_t half = pulse_dft.size() / 2; // one-sided bins 0..half
    std::vector<double> mag(half + 1);
    std::vector<double> energy(half + 1);
    double total_energy = 0.0;
    double peak = 0.0;
    std::size_t k_peak = 0;
    for (std::size_t k = 0; k <= half; ++k) {
        mag[k] = std::abs(pulse_dft[k]);
        energy[k] = mag[k] * mag[k];
        total_energy += energy[k];
        if (mag[k] > peak) {
            peak = mag[k];
            k_peak = k;
        }
    }
    if (peak <= 0.0 || total_energy <= 0.0)
        throw config_error("band selection: pulse spectrum is identically zero");

    const double cut = threshold * peak;
    std::size_t lo = k_peak, hi = k_peak;
    while (lo > 0 && mag[lo - 1] >= cut) --lo;
    while (hi < half && mag[hi + 1] >= cut) ++hi;

    double covered = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) covered += energy[k];
    while (covered < energy_frac * total_energy && (lo > 0 || hi < half)) {
        const double left = lo > 0 ? mag[lo - 1] : -1.0;
        const double right = hi < half ? mag[hi + 1] : -1.0;
        if (left >= right)
            covered += energy[--lo];
        else
            covered += energy[++hi];
    }
    return IndexBand{lo, hi - lo + 1};
}

// Per-element DFT coefficients restricted to the bins nu. The reported
// per-channel sample budget of the frequency pipeline is |nu|.
struct ChannelSpectra {
    std::vector<std::size_t> nu;                             // sorted bin indices
    std::vector<std::vector<std::complex<double>>> coeffs;   // per element, aligned with nu
    std::size_t num_samples = 0;
    double theta = 0.0;
    double sample_rate = 0.0;
};

inline ChannelSpectra channel_dft(const ChannelFrame& frame,
                                  const std::vector<std::size_t>& nu) {
    for (std::size_t v : nu)
        if (v >= frame.num_samples)
            throw config_error("nu: bin " + std::to_string(v) +
                               " is out of range for N = " +
                               std::to_string(frame.num_samples));
    ChannelSpectra spectra;
    spectra.nu = nu;
    spectra.num_samples = frame.num_samples;
    spectra.theta = frame.theta;
    spectra.sample_rate = frame.sample_rate;
    spectra.coeffs.resize(frame.num_elements);
    std::vector<double> row(frame.num_samples);
    for (std::size_t m = 0; m < frame.num_elements; ++m) {
        std::copy(frame.row(m), frame.row(m) + frame.num_samples, row.begin());
        std::vector<std::complex<double>> full = fft::forward_real(row);
        spectra.coeffs[m].resize(nu.size());
        for (std::size_t i = 0; i < nu.size(); ++i)
            spectra.coeffs[m][i] = full[nu[i]];
    }
    return spectra;
}

// Beamformed DFT coefficients on an index set.
struct BeamSpectrum {
    std::vector<std::size_t> indices;
    std::vector<std::complex<double>> coeffs;
    std::size_t num_samples = 0;
    double theta = 0.0;
    double sample_rate = 0.0;
};

// Applies the kernel table: c_k = (1/M) sum_m sum_j R_{k,m}[j] *
// phi_m[(k - j) mod N] for the requested bins, which must lie inside
// the table's band. Every needed channel bin must be present in the
// spectra.
inline BeamSpectrum beamform_freq(const ChannelSpectra& spectra, const QKernelTable& table,
                                  const std::vector<std::size_t>& bins) {
    if (spectra.coeffs.size() != table.num_elements)
        throw structural_error("spectra have " + std::to_string(spectra.coeffs.size()) +
                               " elements but the kernel table was built for " +
                               std::to_string(table.num_elements));
    if (spectra.num_samples != table.num_samples)
        throw structural_error("spectra DFT length " + std::to_string(spectra.num_samples) +
                               " does not match the kernel table's " +
                               std::to_string(table.num_samples));
    for (std::size_t k : bins)
        if (!table.kappa.contains(k))
            throw structural_error("requested bin " + std::to_string(k) +
                                   " lies outside the kernel table's band");

    const std::size_t n_samples = table.num_samples;
    std::vector<std::int64_t> position(n_samples, -1);
    for (std::size_t i = 0; i < spectra.nu.size(); ++i)
        position[spectra.nu[i]] = static_cast<std::int64_t>(i);

    std::vector<std::size_t> missing;
    for (std::size_t k : bins)
        for (std::size_t v : table.nu_of_k(k - table.kappa.first))
            if (position[v] < 0 && missing.size() < 16 &&
                (missing.empty() || missing.back() != v))
                missing.push_back(v);
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
        std::ostringstream oss;
        oss << "channel spectra are missing bins required by the kernel table:";
        for (std::size_t v : missing) oss << ' ' << v;
        oss << (missing.size() >= 16 ? " ..." : "");
        throw structural_error(oss.str());
    }

    BeamSpectrum spec;
    spec.num_samples = n_samples;
    spec.theta = spectra.theta;
    spec.sample_rate = spectra.sample_rate;
    spec.indices = bins;
    spec.coeffs.assign(bins.size(), {0.0, 0.0});
    const auto n_signed = static_cast<std::int64_t>(n_samples);
    for (std::size_t b = 0; b < bins.size(); ++b) {
        const std::size_t k_rel = bins[b] - table.kappa.first;
        const auto k_abs = static_cast<std::int64_t>(bins[b]);
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t m = 0; m < table.num_elements; ++m) {
            const std::size_t cell = table.idx(k_rel, m);
            const std::int32_t lo = table.win_lo[cell];
            const std::int32_t hi = table.win_hi[cell];
            const std::complex<double>* r = &table.pool[table.pool_start[cell]];
            for (std::int32_t j = lo; j <= hi; ++j) {
                std::int64_t v = (k_abs - j) % n_signed;
                if (v < 0) v += n_signed;
                acc += r[j - lo] * spectra.coeffs[m][static_cast<std::size_t>(position[v])];
            }
        }
        spec.coeffs[b] = acc / static_cast<double>(table.num_elements);
    }
    return spec;
}

// Convenience: beamform every bin of the table's band.
inline BeamSpectrum beamform_freq(const ChannelSpectra& spectra, const QKernelTable& table) {
    std::vector<std::size_t> bins(table.kappa.count);
    for (std::size_t i = 0; i < bins.size(); ++i) bins[i] = table.kappa.first + i;
    return beamform_freq(spectra, table, bins);
}

// Synthesizes the real beamformed line from band coefficients by
// placing them in a length-N spectrum, imposing conjugate symmetry,
// and inverse transforming. The imaginary residue is checked against
// a coarse bound before being discarded.
inline BeamformedLine synthesize_line(const BeamSpectrum& spec) {
    if (spec.num_samples == 0)
        throw structural_error("beam spectrum has no grid length set");
    const std::size_t n_samples = spec.num_samples;
    std::vector<std::complex<double>> full(n_samples, {0.0, 0.0});
    for (std::size_t i = 0; i < spec.indices.size(); ++i) {
        const std::size_t k = spec.indices[i];
        if (k >= n_samples)
            throw structural_error("beam spectrum index " + std::to_string(k) +
                                   " out of range");
        full[k] = spec.coeffs[i];
        const std::size_t mirror = (n_samples - k) % n_samples;
        if (mirror != k)
            full[mirror] = std::conj(spec.coeffs[i]);
        else
            full[k] = {spec.coeffs[i].real(), 0.0}; // self-conjugate bin must be real
    }
    std::vector<std::complex<double>> time = fft::inverse(full);
    double norm_sq = 0.0, imag_sq = 0.0;
    for (const auto& v : time) {
        norm_sq += std::norm(v);
        imag_sq += v.imag() * v.imag();
    }
    if (norm_sq > 0.0 && std::sqrt(imag_sq) > 1e-6 * std::sqrt(norm_sq))
        throw structural_error("synthesized line has a non-negligible imaginary part; "
                               "conjugate symmetry was violated upstream");
    BeamformedLine line = make_frame(1, n_samples, spec.theta, spec.sample_rate);
    for (std::size_t n = 0; n < n_samples; ++n) line.row(0)[n] = time[n].real();
    return line;
}

// One row of the sample-budget report.
inline constexpr const char* budget_csv_header = "theta,kappa,nu,ratio,N,reduction";

inline std::string budget_csv_row(const QKernelTable& table) {
    const KernelStats st = kernel_stats(table);
    std::ostringstream oss;
    oss << table.theta << ',' << st.kappa_size << ',' << st.nu_size << ',' << st.ratio
        << ',' << st.num_samples << ',' << st.reduction;
    return oss.str();
}

} // namespace subeam
