// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.
//
// Compressed-sensing recovery of a beamformed line from a subset
// mu of its band coefficients. Measurements are pulse-normalized:
// entry k holds c_k / h_k, so a line of L pulse replicas at integer
// delays q_l becomes a sum of L complex exponentials across k.
//
// Two recovery routes:
//  - recover_omp: greedy synthesis-sparse recovery over the dictionary
//    of N delayed pulses (orthogonal matching pursuit).
//  - recover_analysis_l1: minimizes the l1 norm of the analyzed signal
//    D* c subject to matching the measured coefficients, solved with
//    ADMM. This keeps diffuse speckle that a low-order sparse fit
//    discards.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "subeam/channel_frame.hpp"
#include "subeam/errors.hpp"
#include "subeam/fft.hpp"
#include "subeam/freq_beamform.hpp"

namespace subeam {

struct PartialMeasurement {
    std::vector<std::size_t> mu;              // measured bins, subset of kappa
    std::vector<std::complex<double>> values; // c_k / h_k on mu
    std::vector<std::complex<double>> h_used; // h_k at mu, for resynthesis
    std::size_t num_samples = 0;              // N
    double theta = 0.0;
    double sample_rate = 0.0;
};

// Picks the measured subset mu from the band kappa.
// "central": M_meas bins centered on the peak-|h_k| bin of the band.
// "uniform": M_meas bins evenly spread across the band.
inline std::vector<std::size_t> choose_mu(const IndexBand& kappa, std::size_t m_meas,
                                          const std::string& strategy,
                                          const std::vector<std::complex<double>>& pulse_dft) {
    if (m_meas == 0)
        throw config_error("mu size: must be positive");
    if (m_meas > kappa.count)
        throw config_error("mu size: cannot exceed the band size |kappa| = " +
                           std::to_string(kappa.count));
    std::vector<std::size_t> mu(m_meas);
    if (strategy == "central") {
        std::size_t k_peak = kappa.first;
        double peak = -1.0;
        for (std::size_t k = kappa.first; k <= kappa.last(); ++k) {
            double a = std::abs(pulse_dft.at(k));
            if (a > peak) {
                peak = a;
                k_peak = k;
            }
        }
        // Clamp the centered window into the band.
        std::size_t start = k_peak >= m_meas / 2 ? k_peak - m_meas / 2 : 0;
        start = std::max(start, kappa.first);
        start = std::min(start, kappa.first + kappa.count - m_meas);
        for (std::size_t i = 0; i < m_meas; ++i) mu[i] = start + i;
    } else if (strategy == "uniform") {
        for (std::size_t i = 0; i < m_meas; ++i) {
            auto offset = static_cast<std::size_t>(
                (static_cast<double>(i) + 0.5) * static_cast<double>(kappa.count) /
                static_cast<double>(m_meas));
            mu[i] = kappa.first + std::min(offset, kappa.count - 1);
        }
    } else {
        throw config_error("mu strategy: must be 'central' or 'uniform'");
    }
    return mu;
}

// Divides band coefficients by the pulse spectrum on mu. Bins where
// |h_k| sits below 1e-6 of the spectrum peak are rejected, since the
// division would amplify noise unboundedly there.
inline PartialMeasurement build_measurement(const BeamSpectrum& spec,
                                            const std::vector<std::complex<double>>& pulse_dft,
                                            const std::vector<std::size_t>& mu) {
    double h_max = 0.0;
    for (const auto& h : pulse_dft) h_max = std::max(h_max, std::abs(h));
    if (h_max <= 0.0)
        throw config_error("pulse spectrum is identically zero");

    PartialMeasurement meas;
    meas.mu = mu;
    meas.num_samples = spec.num_samples;
    meas.theta = spec.theta;
    meas.sample_rate = spec.sample_rate;
    meas.values.resize(mu.size());
    meas.h_used.resize(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const std::size_t k = mu[i];
        auto it = std::find(spec.indices.begin(), spec.indices.end(), k);
        if (it == spec.indices.end())
            throw config_error("mu bin " + std::to_string(k) +
                               " is not present in the beam spectrum");
        const std::complex<double> h = pulse_dft.at(k);
        if (std::abs(h) < 1e-6 * h_max)
            throw config_error("mu bin " + std::to_string(k) +
                               " rejected: pulse spectrum is below the division floor there");
        const std::size_t pos = static_cast<std::size_t>(it - spec.indices.begin());
        meas.values[i] = spec.coeffs[pos] / h;
        meas.h_used[i] = h;
    }
    return meas;
}

// ---- synthesis route: orthogonal matching pursuit -----------------------

struct OmpOptions {
    // Stop once the residual drops below this fraction of the
    // measurement norm.
    double residual_tol = 1e-12;
};

struct SparseSolution {
    std::vector<std::size_t> support; // delay indices q_l
    std::vector<double> amplitudes;   // b_l
    double residual_norm = 0.0;
    std::vector<double> residual_trace; // norm after each iteration
    std::size_t iterations = 0;
    bool flagged_rank_deficient = false;
    std::size_t num_samples = 0;
    double theta = 0.0;
    double sample_rate = 0.0;
};

// Greedy pursuit over the dictionary of N integer-delay atoms
// a_q[k] = e^{-i 2 pi k q / N} restricted to the measured bins.
// Correlations against all atoms at once come from one zero-padded
// inverse transform. Amplitudes are real, so atoms are scored by the
// real part of the correlation, and the least-squares refit stacks
// real and imaginary parts.
inline SparseSolution recover_omp(const PartialMeasurement& meas, std::size_t l_max,
                                  const OmpOptions& options = {}) {
    if (l_max < 1)
        throw config_error("L: must be at least 1");
    if (2 * l_max > meas.mu.size())
        throw config_error("L: identifiability requires 2L <= |mu| (got L = " +
                           std::to_string(l_max) + ", |mu| = " +
                           std::to_string(meas.mu.size()) + ")");
    const std::size_t n_samples = meas.num_samples;
    const std::size_t n_meas = meas.mu.size();

    SparseSolution sol;
    sol.num_samples = n_samples;
    sol.theta = meas.theta;
    sol.sample_rate = meas.sample_rate;

    double meas_norm = 0.0;
    for (const auto& v : meas.values) meas_norm += std::norm(v);
    meas_norm = std::sqrt(meas_norm);
    if (meas_norm == 0.0) {
        sol.residual_norm = 0.0;
        return sol;
    }

    std::vector<std::complex<double>> residual = meas.values;
    std::vector<char> selected(n_samples, 0);
    std::vector<std::complex<double>> embedded(n_samples);

    const double two_pi = 2.0 * std::numbers::pi;
    auto atom_value = [&](std::size_t k, std::size_t q) {
        return std::polar(1.0, -two_pi * static_cast<double>(k) * static_cast<double>(q) /
                                   static_cast<double>(n_samples));
    };

    double residual_norm = meas_norm;
    while (sol.support.size() < l_max &&
           residual_norm > options.residual_tol * meas_norm) {
        // Correlate the residual with every atom.
        std::fill(embedded.begin(), embedded.end(), std::complex<double>{0.0, 0.0});
        for (std::size_t i = 0; i < n_meas; ++i) embedded[meas.mu[i]] = residual[i];
        std::vector<std::complex<double>> corr = fft::backward_unscaled(embedded);

        std::size_t best = n_samples;
        double best_score = -1.0;
        for (std::size_t q = 0; q < n_samples; ++q) {
            if (selected[q]) continue;
            double score = std::abs(corr[q].real());
            if (score > best_score) {
                best_score = score;
                best = q;
            }
        }
        if (best == n_samples) break;
        selected[best] = 1;
        sol.support.push_back(best);

        // Real least squares on the selected support.
        const std::size_t l = sol.support.size();
        Eigen::MatrixXd a(2 * n_meas, l);
        Eigen::VectorXd y(2 * n_meas);
        for (std::size_t i = 0; i < n_meas; ++i) {
            y(static_cast<Eigen::Index>(i)) = meas.values[i].real();
            y(static_cast<Eigen::Index>(n_meas + i)) = meas.values[i].imag();
            for (std::size_t c = 0; c < l; ++c) {
                const std::complex<double> av = atom_value(meas.mu[i], sol.support[c]);
                a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = av.real();
                a(static_cast<Eigen::Index>(n_meas + i), static_cast<Eigen::Index>(c)) =
                    av.imag();
            }
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        if (qr.rank() < static_cast<Eigen::Index>(l)) {
            // Degenerate atom set: drop the newest atom and stop.
            selected[sol.support.back()] = 0;
            sol.support.pop_back();
            sol.flagged_rank_deficient = true;
            break;
        }
        Eigen::VectorXd x = qr.solve(y);
        sol.amplitudes.assign(x.data(), x.data() + x.size());

        // New residual.
        double r_sq = 0.0;
        for (std::size_t i = 0; i < n_meas; ++i) {
            std::complex<double> fit{0.0, 0.0};
            for (std::size_t c = 0; c < sol.support.size(); ++c)
                fit += sol.amplitudes[c] * atom_value(meas.mu[i], sol.support[c]);
            residual[i] = meas.values[i] - fit;
            r_sq += std::norm(residual[i]);
        }
        residual_norm = std::sqrt(r_sq);
        sol.residual_trace.push_back(residual_norm);
        ++sol.iterations;
    }
    sol.residual_norm = residual_norm;
    return sol;
}

// Time-domain line of the sparse solution: sum_l b_l h[(n - q_l) mod N].
inline BeamformedLine line_from_sparse(const SparseSolution& sol,
                                       const std::vector<double>& pulse_samples) {
    const std::size_t n_samples = sol.num_samples;
    if (pulse_samples.size() != n_samples)
        throw structural_error("pulse sample length does not match the solution grid");
    BeamformedLine line = make_frame(1, n_samples, sol.theta, sol.sample_rate);
    for (std::size_t l = 0; l < sol.support.size(); ++l) {
        const std::size_t q = sol.support[l];
        const double b = sol.amplitudes[l];
        for (std::size_t n = 0; n < n_samples; ++n)
            line.row(0)[n] += b * pulse_samples[(n + n_samples - q) % n_samples];
    }
    return line;
}

// ---- analysis route: l1 minimization via ADMM ---------------------------

struct AnalysisOptions {
    std::size_t max_iterations = 5000;
    // Exit once the relative objective change stays below obj_tol for
    // `patience` consecutive iterations (and the iterate is feasible).
    double obj_tol = 1e-6;
    std::size_t patience = 10;
    // ADMM penalty is rho_scale divided by the mean analyzed magnitude
    // of the zero-filled measurement, making the threshold scale-free.
    double rho_scale = 9.0;
};

struct AnalysisSolution {
    std::vector<std::size_t> kappa_indices;   // the band the variable lives on
    std::vector<std::complex<double>> coeffs; // normalized coefficients c_k/h_k on kappa
    double objective = 0.0;                   // l1 norm of the analyzed signal
    double constraint_residual = 0.0;         // || c|mu - c_mu ||_2
    std::size_t iterations = 0;
    bool feasible = false;
    std::size_t num_samples = 0;
    double theta = 0.0;
    double sample_rate = 0.0;
};

// Solves min || D* c ||_1 subject to || c|mu - c_mu ||_2 <= eps, where
// c lives on the band kappa and D* maps band coefficients to the
// length-N analyzed domain (zero-padded inverse DFT scaled by N, so
// that D D* = N I). ADMM alternates an exact data projection in the
// coefficient domain with complex soft-thresholding in the analyzed
// domain.
inline AnalysisSolution recover_analysis_l1(const PartialMeasurement& meas,
                                            const IndexBand& kappa, double eps,
                                            const AnalysisOptions& options = {}) {
    if (!(eps >= 0.0))
        throw config_error("eps: must be nonnegative");
    const std::size_t n_samples = meas.num_samples;
    const std::size_t k_count = kappa.count;

    // Positions of mu inside kappa.
    std::vector<std::size_t> mu_pos(meas.mu.size());
    for (std::size_t i = 0; i < meas.mu.size(); ++i) {
        if (!kappa.contains(meas.mu[i]))
            throw config_error("mu bin " + std::to_string(meas.mu[i]) +
                               " lies outside the band kappa");
        mu_pos[i] = meas.mu[i] - kappa.first;
    }

    AnalysisSolution sol;
    sol.num_samples = n_samples;
    sol.theta = meas.theta;
    sol.sample_rate = meas.sample_rate;
    sol.kappa_indices.resize(k_count);
    for (std::size_t i = 0; i < k_count; ++i) sol.kappa_indices[i] = kappa.first + i;

    std::vector<std::complex<double>> c(k_count, {0.0, 0.0});
    auto project_data = [&](std::vector<std::complex<double>>& v) {
        if (eps == 0.0) {
            for (std::size_t i = 0; i < mu_pos.size(); ++i) v[mu_pos[i]] = meas.values[i];
            return;
        }
        double d_sq = 0.0;
        for (std::size_t i = 0; i < mu_pos.size(); ++i)
            d_sq += std::norm(v[mu_pos[i]] - meas.values[i]);
        const double d = std::sqrt(d_sq);
        if (d > eps) {
            const double scale = eps / d;
            for (std::size_t i = 0; i < mu_pos.size(); ++i)
                v[mu_pos[i]] = meas.values[i] + (v[mu_pos[i]] - meas.values[i]) * scale;
        }
    };
    project_data(c);

    // D* c: zero-pad onto the full grid and inverse transform, scaled
    // so the round trip D D* is N times the identity.
    std::vector<std::complex<double>> full(n_samples);
    auto analyze = [&](const std::vector<std::complex<double>>& v) {
        std::fill(full.begin(), full.end(), std::complex<double>{0.0, 0.0});
        for (std::size_t i = 0; i < k_count; ++i) full[kappa.first + i] = v[i];
        return fft::backward_unscaled(full);
    };

    std::vector<std::complex<double>> w = analyze(c);
    double mean_mag = 0.0;
    for (const auto& x : w) mean_mag += std::abs(x);
    mean_mag /= static_cast<double>(n_samples);
    if (mean_mag == 0.0) {
        // Zero measurement; c = 0 is optimal and feasible.
        sol.coeffs = c;
        sol.feasible = true;
        return sol;
    }
    const double rho = options.rho_scale / mean_mag;
    const double threshold = 1.0 / rho;

    std::vector<std::complex<double>> z = w;
    std::vector<std::complex<double>> u(n_samples, {0.0, 0.0});
    std::vector<std::complex<double>> diff(n_samples);

    double prev_obj = -1.0;
    std::size_t streak = 0;
    std::size_t iter = 0;
    for (iter = 1; iter <= options.max_iterations; ++iter) {
        // c-update: unconstrained minimizer of the augmented term is
        // D(z - u)/N, then project onto the data constraint.
        for (std::size_t n = 0; n < n_samples; ++n) diff[n] = z[n] - u[n];
        std::vector<std::complex<double>> fwd = fft::forward(diff);
        for (std::size_t i = 0; i < k_count; ++i)
            c[i] = fwd[kappa.first + i] / static_cast<double>(n_samples);
        project_data(c);

        w = analyze(c);
        double obj = 0.0;
        for (const auto& x : w) obj += std::abs(x);

        // z-update: complex soft threshold of w + u at 1/rho.
        for (std::size_t n = 0; n < n_samples; ++n) {
            const std::complex<double> x = w[n] + u[n];
            const double mag = std::abs(x);
            z[n] = mag <= threshold ? std::complex<double>{0.0, 0.0}
                                    : x * (1.0 - threshold / mag);
            u[n] += w[n] - z[n];
        }

        const double rel =
            std::abs(obj - prev_obj) / std::max(obj, 1e-300);
        prev_obj = obj;
        if (rel < options.obj_tol)
            ++streak;
        else
            streak = 0;
        if (streak >= options.patience) break;
    }

    double cr_sq = 0.0;
    for (std::size_t i = 0; i < mu_pos.size(); ++i)
        cr_sq += std::norm(c[mu_pos[i]] - meas.values[i]);
    sol.constraint_residual = std::sqrt(cr_sq);
    sol.feasible = sol.constraint_residual <= eps + 1e-9;
    sol.coeffs = c;
    sol.objective = prev_obj < 0.0 ? 0.0 : prev_obj;
    sol.iterations = std::min(iter, options.max_iterations);
    return sol;
}

// Denormalizes an analysis solution back to band coefficients
// c_k = h_k * ĉ_k, ready for synthesize_line.
inline BeamSpectrum spectrum_from_analysis(const AnalysisSolution& sol,
                                           const std::vector<std::complex<double>>& pulse_dft) {
    BeamSpectrum spec;
    spec.indices = sol.kappa_indices;
    spec.num_samples = sol.num_samples;
    spec.theta = sol.theta;
    spec.sample_rate = sol.sample_rate;
    spec.coeffs.resize(sol.coeffs.size());
    for (std::size_t i = 0; i < sol.coeffs.size(); ++i)
        spec.coeffs[i] = sol.coeffs[i] * pulse_dft.at(spec.indices[i]);
    return spec;
}

} // namespace subeam
