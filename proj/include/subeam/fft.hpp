// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.
//
// Thin FFTW3 wrapper with a per-size plan cache. Forward transforms use
// the e^{-i 2 pi k n / N} kernel and are unnormalized; inverse() divides
// by N so that inverse(forward(x)) == x.

#pragma once

#include <complex>
#include <cstring>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "subeam/errors.hpp"

namespace subeam::fft {

namespace detail {

class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    // Executes one transform of the given size and sign through the
    // cached plan, copying in and out of the plan's aligned buffers.
    void execute(std::size_t n, int sign, const std::complex<double>* in,
                 std::complex<double>* out) {
        std::lock_guard<std::mutex> lock(mutex_);
        Entry& e = entry(n);
        std::memcpy(static_cast<void*>(e.buf_in), static_cast<const void*>(in),
                    n * sizeof(std::complex<double>));
        fftw_execute(sign == FFTW_FORWARD ? e.forward : e.backward);
        std::memcpy(static_cast<void*>(out), static_cast<const void*>(e.buf_out),
                    n * sizeof(std::complex<double>));
    }

private:
    struct Entry {
        fftw_complex* buf_in = nullptr;
        fftw_complex* buf_out = nullptr;
        fftw_plan forward = nullptr;
        fftw_plan backward = nullptr;
    };

    Entry& entry(std::size_t n) {
        auto it = entries_.find(n);
        if (it != entries_.end()) return it->second;
        Entry e;
        e.buf_in = fftw_alloc_complex(n);
        e.buf_out = fftw_alloc_complex(n);
        if (!e.buf_in || !e.buf_out)
            throw error("FFT buffer allocation failed for size " + std::to_string(n));
        int ni = static_cast<int>(n);
        e.forward = fftw_plan_dft_1d(ni, e.buf_in, e.buf_out, FFTW_FORWARD, FFTW_ESTIMATE);
        e.backward = fftw_plan_dft_1d(ni, e.buf_in, e.buf_out, FFTW_BACKWARD, FFTW_ESTIMATE);
        if (!e.forward || !e.backward)
            throw error("FFT planning failed for size " + std::to_string(n));
        return entries_.emplace(n, e).first->second;
    }

    ~PlanCache() {
        for (auto& [n, e] : entries_) {
            fftw_destroy_plan(e.forward);
            fftw_destroy_plan(e.backward);
            fftw_free(e.buf_in);
            fftw_free(e.buf_out);
        }
    }

    std::mutex mutex_;
    std::map<std::size_t, Entry> entries_;
};

} // namespace detail

// Unnormalized forward DFT: X[k] = sum_n x[n] e^{-i 2 pi k n / N}.
inline std::vector<std::complex<double>> forward(std::span<const std::complex<double>> x) {
    if (x.empty()) throw error("FFT of an empty vector");
    std::vector<std::complex<double>> out(x.size());
    detail::PlanCache::instance().execute(x.size(), FFTW_FORWARD, x.data(), out.data());
    return out;
}

// Normalized inverse DFT: x[n] = (1/N) sum_k X[k] e^{+i 2 pi k n / N}.
inline std::vector<std::complex<double>> inverse(std::span<const std::complex<double>> X) {
    if (X.empty()) throw error("inverse FFT of an empty vector");
    std::vector<std::complex<double>> out(X.size());
    detail::PlanCache::instance().execute(X.size(), FFTW_BACKWARD, X.data(), out.data());
    double scale = 1.0 / static_cast<double>(X.size());
    for (auto& v : out) v *= scale;
    return out;
}

// Unnormalized backward DFT: y[n] = sum_k X[k] e^{+i 2 pi k n / N}.
inline std::vector<std::complex<double>> backward_unscaled(
    std::span<const std::complex<double>> X) {
    if (X.empty()) throw error("inverse FFT of an empty vector");
    std::vector<std::complex<double>> out(X.size());
    detail::PlanCache::instance().execute(X.size(), FFTW_BACKWARD, X.data(), out.data());
    return out;
}

// Forward DFT of a real signal.
inline std::vector<std::complex<double>> forward_real(std::span<const double> x) {
    std::vector<std::complex<double>> cx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) cx[i] = {x[i], 0.0};
    return forward(cx);
}

} // namespace subeam::fft
