// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.
//
// Frequency-domain beamforming kernel tables.
//
// Delay-and-sum reads element signals at warped times. In the DFT
// domain that warp becomes, per output bin k and element m, a short
// convolution: c_k = (1/M) sum_m sum_j R_{k,m}[j] * phi_m[(k - j) mod N],
// where phi_m is the element's length-N DFT. The table R is built so
// that the frequency path reproduces the time-domain beamformer's
// discrete reads exactly when no coefficients are dropped:
//
//   chi_{k,m}[i] = sum over output samples n whose interpolated read
//                  touches channel sample i of
//                  weight(n, i) * e^{+i 2 pi k (i - n) / N},
//   R_{k,m} = DFT(chi_{k,m}) / N,
//
// with weight(n, i) the linear-interpolation weight of sample i in the
// read at position tau(t_n) * fs. R decays fast in j, so each (k, m)
// keeps only a small window of offsets. The retained channel bins
// nu(k) = { k - j } form the per-channel sample budget.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "subeam/channel_frame.hpp"
#include "subeam/config.hpp"
#include "subeam/errors.hpp"
#include "subeam/fft.hpp"
#include "subeam/time_beamform.hpp"

namespace subeam {

// Contiguous DFT index band [first, first + count).
struct IndexBand {
    std::size_t first = 0;
    std::size_t count = 0;

    std::size_t last() const { return first + count - 1; }
    bool contains(std::size_t k) const { return k >= first && k < first + count; }
};

struct KernelOptions {
    // Per-(k, m) dropped-energy target. Window growth stops early once
    // the retained fraction reaches 1 - eps_q.
    double eps_q = 1e-3;

    // Hard extent caps on the offset window, in bins: offsets j are
    // confined to [-cap_neg, +cap_pos]. The caps bound the per-channel
    // sample budget; where they bind, the achieved dropped energy is
    // recorded in the table instead of meeting eps_q.
    int cap_neg = 24;
    int cap_pos = 8;
};

inline void validate_kernel_options(const KernelOptions& opt) {
    if (!(opt.eps_q > 0.0 && opt.eps_q < 1.0))
        throw config_error("eps_q: must lie strictly between 0 and 1");
    if (opt.cap_neg < 0 || opt.cap_pos < 0)
        throw config_error("window caps: must be nonnegative");
}

// Continuous-time distortion kernel for one element and one DFT bin.
// The indicator over [|gamma|, tau(P; theta)) is evaluated first; the
// rational factor and phase are only computed inside it, which keeps
// the t = gamma sin(theta) pole unreachable. P = N/fs is the exact
// span of the sampled grid.
inline std::complex<double> eval_q(double t, std::size_t k, double theta, double gamma,
                                   const GridSpec& grid) {
    const double period = grid.period();
    const double upper = element_delay(period, theta, gamma);
    if (!(t >= std::abs(gamma) && t < upper)) return {0.0, 0.0};
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    const double denom = t - gamma * s;
    const double amp = 1.0 + (gamma * gamma * c * c) / (denom * denom);
    const double phase = 2.0 * std::numbers::pi / period * static_cast<double>(k) *
                         gamma * (gamma - t * s) / denom;
    return std::polar(amp, phase);
}

// Sparse kernel table for one direction: per (k in kappa, element m) a
// contiguous offset window [win_lo, win_hi] and its coefficients.
struct QKernelTable {
    double theta = 0.0;
    double eps_q = 1e-3;
    int cap_neg = 0;
    int cap_pos = 0;
    std::size_t num_samples = 0;  // N
    double sample_rate = 0.0;     // fs
    std::size_t num_elements = 0; // M
    IndexBand kappa;

    // Per (k, m), indexed as k_rel * num_elements + m.
    std::vector<std::int32_t> win_lo;
    std::vector<std::int32_t> win_hi;
    std::vector<std::uint64_t> pool_start;
    std::vector<double> dropped_energy; // achieved dropped fraction
    std::vector<std::complex<double>> pool;

    std::size_t idx(std::size_t k_rel, std::size_t m) const {
        return k_rel * num_elements + m;
    }

    // Coefficient R_{k,m}[j]; j must lie inside the stored window.
    std::complex<double> coeff(std::size_t k_rel, std::size_t m, std::int32_t j) const {
        std::size_t i = idx(k_rel, m);
        return pool[pool_start[i] + static_cast<std::size_t>(j - win_lo[i])];
    }

    // Offset hull over all elements for one k.
    void offset_hull(std::size_t k_rel, std::int32_t& lo, std::int32_t& hi) const {
        lo = win_lo[idx(k_rel, 0)];
        hi = win_hi[idx(k_rel, 0)];
        for (std::size_t m = 1; m < num_elements; ++m) {
            lo = std::min(lo, win_lo[idx(k_rel, m)]);
            hi = std::max(hi, win_hi[idx(k_rel, m)]);
        }
    }

    // Channel bins nu(k) = { (k - j) mod N : j in the offset hull }.
    std::vector<std::size_t> nu_of_k(std::size_t k_rel) const {
        std::int32_t lo, hi;
        offset_hull(k_rel, lo, hi);
        std::vector<std::size_t> out;
        out.reserve(static_cast<std::size_t>(hi - lo + 1));
        auto n = static_cast<std::int64_t>(num_samples);
        auto k_abs = static_cast<std::int64_t>(kappa.first + k_rel);
        for (std::int32_t j = lo; j <= hi; ++j) {
            std::int64_t v = (k_abs - j) % n;
            if (v < 0) v += n;
            out.push_back(static_cast<std::size_t>(v));
        }
        return out;
    }

    // All channel bins needed across kappa, sorted ascending.
    std::vector<std::size_t> nu_union() const {
        std::vector<char> mark(num_samples, 0);
        for (std::size_t k_rel = 0; k_rel < kappa.count; ++k_rel)
            for (std::size_t v : nu_of_k(k_rel)) mark[v] = 1;
        std::vector<std::size_t> out;
        for (std::size_t v = 0; v < num_samples; ++v)
            if (mark[v]) out.push_back(v);
        return out;
    }

    // Channel bins needed for a subset of the band, sorted ascending.
    std::vector<std::size_t> nu_union_of(const std::vector<std::size_t>& bins) const {
        std::vector<char> mark(num_samples, 0);
        for (std::size_t k : bins) {
            if (!kappa.contains(k))
                throw structural_error("bin " + std::to_string(k) +
                                       " lies outside the kernel table's band");
            for (std::size_t v : nu_of_k(k - kappa.first)) mark[v] = 1;
        }
        std::vector<std::size_t> out;
        for (std::size_t v = 0; v < num_samples; ++v)
            if (mark[v]) out.push_back(v);
        return out;
    }

    double max_dropped_energy() const {
        double worst = 0.0;
        for (double d : dropped_energy) worst = std::max(worst, d);
        return worst;
    }
};

namespace detail {

// Linear-interpolation read geometry of one element across the grid.
struct ReadGeometry {
    std::vector<std::int64_t> base;  // floor(tau(t_n) * fs)
    std::vector<double> frac;        // fractional part of the read position
    std::vector<std::int32_t> alpha; // base - n
    std::int32_t alpha_min = 0;
    std::int32_t alpha_max = 0;
};

inline ReadGeometry read_geometry(const GridSpec& grid, double theta, double gamma) {
    const std::size_t n_samples = grid.num_samples;
    ReadGeometry rg;
    rg.base.resize(n_samples);
    rg.frac.resize(n_samples);
    rg.alpha.resize(n_samples);
    for (std::size_t n = 0; n < n_samples; ++n) {
        double p = element_delay(grid.time(n), theta, gamma) * grid.sample_rate;
        double fl = std::floor(p);
        rg.base[n] = static_cast<std::int64_t>(fl);
        rg.frac[n] = p - fl;
        rg.alpha[n] = static_cast<std::int32_t>(rg.base[n] - static_cast<std::int64_t>(n));
    }
    rg.alpha_min = *std::min_element(rg.alpha.begin(), rg.alpha.end());
    rg.alpha_max = *std::max_element(rg.alpha.begin(), rg.alpha.end());
    return rg;
}

// Exact per-bin energy of chi_{k,m} via pair-difference cosine sums:
// sum_i |chi_k[i]|^2 = C_0 + 2 sum_{d>0} C_d cos(2 pi k d / N), where
// C_d collects products of read weights landing on the same channel
// sample with alpha difference d. The table works with R = DFT(chi)/N,
// whose energy is this sum divided by N (Parseval).
class EnergyProfile {
public:
    EnergyProfile(const ReadGeometry& rg, std::size_t n_samples) {
        // Bucket reads by the channel sample they touch.
        std::vector<std::vector<std::pair<double, std::int32_t>>> buckets(n_samples);
        for (std::size_t n = 0; n < rg.base.size(); ++n) {
            std::int64_t i0 = rg.base[n];
            double fr = rg.frac[n];
            if (i0 >= 0 && i0 < static_cast<std::int64_t>(n_samples))
                buckets[static_cast<std::size_t>(i0)].emplace_back(1.0 - fr, rg.alpha[n]);
            if (i0 + 1 >= 0 && i0 + 1 < static_cast<std::int64_t>(n_samples))
                buckets[static_cast<std::size_t>(i0 + 1)].emplace_back(fr, rg.alpha[n] + 1);
        }
        for (const auto& bucket : buckets) {
            for (std::size_t r = 0; r < bucket.size(); ++r) {
                for (std::size_t s = 0; s < bucket.size(); ++s) {
                    int d = std::abs(bucket[r].second - bucket[s].second);
                    if (static_cast<std::size_t>(d) >= coeff_.size())
                        coeff_.resize(static_cast<std::size_t>(d) + 1, 0.0);
                    double w = bucket[r].first * bucket[s].first;
                    coeff_[static_cast<std::size_t>(d)] += (d == 0) ? w : 0.5 * w;
                }
            }
        }
        n_ = static_cast<double>(n_samples);
    }

    // Energy of R_{k,m} over all offsets, for absolute bin k.
    double at(std::size_t k) const {
        double w = 2.0 * std::numbers::pi * static_cast<double>(k) / n_;
        double e = 0.0;
        for (std::size_t d = 0; d < coeff_.size(); ++d)
            e += coeff_[d] * ((d == 0) ? 1.0 : 2.0 * std::cos(w * static_cast<double>(d)));
        return e / n_;
    }

private:
    std::vector<double> coeff_; // C_d, with the symmetric pairs folded
    double n_ = 1.0;
};

} // namespace detail

// Builds the kernel table for one direction.
//
// The per-element coefficients are computed with a factored transform
// rather than one DFT per (k, m): reads are grouped by their integer
// shift alpha = floor(tau(t_n) fs) - n, accumulated into per-offset
// spectra, and a single length-N inverse transform per offset yields
// R_{k,m}[j] for every k at once. Offset windows are then grown
// greedily from j = 0, expanding toward the side with the larger
// coefficient, until the retained energy reaches (1 - eps_q) of the
// exact total or the extent caps stop growth.
inline QKernelTable build_kernel_table(const ArrayGeometry& geom, const ImagingConfig& cfg,
                                       double theta, const IndexBand& kappa,
                                       const KernelOptions& options = {}) {
    validate_geometry(geom);
    validate_imaging(cfg);
    validate_kernel_options(options);
    const GridSpec grid = derive_grid(cfg, geom);
    const std::size_t n_samples = grid.num_samples;
    if (kappa.count == 0)
        throw config_error("kappa: band must be nonempty");
    if (kappa.first + kappa.count > n_samples)
        throw config_error("kappa: band exceeds the DFT length");

    const std::size_t n_elem = geom.num_elements();
    const int cap_neg = options.cap_neg;
    const int cap_pos = options.cap_pos;
    const std::size_t window = static_cast<std::size_t>(cap_neg + cap_pos + 1);
    const double two_pi = 2.0 * std::numbers::pi;

    QKernelTable table;
    table.theta = theta;
    table.eps_q = options.eps_q;
    table.cap_neg = cap_neg;
    table.cap_pos = cap_pos;
    table.num_samples = n_samples;
    table.sample_rate = grid.sample_rate;
    table.num_elements = n_elem;
    table.kappa = kappa;
    table.win_lo.resize(kappa.count * n_elem);
    table.win_hi.resize(kappa.count * n_elem);
    table.pool_start.resize(kappa.count * n_elem);
    table.dropped_energy.resize(kappa.count * n_elem);

    // Scratch: full-window coefficients for one element at all k.
    std::vector<std::complex<double>> coeffs(kappa.count * window);
    std::vector<std::complex<double>> padded(n_samples);

    for (std::size_t m = 0; m < n_elem; ++m) {
        const double gamma = geom.gamma(m);
        const detail::ReadGeometry rg = detail::read_geometry(grid, theta, gamma);
        const detail::EnergyProfile energy(rg, n_samples);
        const std::size_t n_alpha =
            static_cast<std::size_t>(rg.alpha_max - rg.alpha_min + 1);
        if (n_alpha > n_samples)
            throw structural_error("element " + std::to_string(m) +
                                   ": read shifts span more than the grid length; "
                                   "offset too large for this window");

        // Per-shift spectra over the offset window: S1 for the floor
        // read, S2 for the ceil read.
        std::vector<std::complex<double>> s1(n_alpha * window);
        std::vector<std::complex<double>> s2(n_alpha * window);
        std::vector<std::complex<double>> twiddle(window);
        std::vector<std::complex<double>> step(window);
        for (std::size_t jj = 0; jj < window; ++jj) {
            double j = static_cast<double>(static_cast<int>(jj) - cap_neg);
            step[jj] = std::polar(1.0, -two_pi * j / static_cast<double>(n_samples));
        }
        for (std::size_t n = 0; n < n_samples; ++n) {
            if (n % 512 == 0) {
                for (std::size_t jj = 0; jj < window; ++jj) {
                    double j = static_cast<double>(static_cast<int>(jj) - cap_neg);
                    twiddle[jj] = std::polar(
                        1.0, -two_pi * j * static_cast<double>(n) / static_cast<double>(n_samples));
                }
            }
            const std::int64_t i0 = rg.base[n];
            const double fr = rg.frac[n];
            const auto a_row =
                static_cast<std::size_t>(rg.alpha[n] - rg.alpha_min) * window;
            const bool valid0 = i0 >= 0 && i0 < static_cast<std::int64_t>(n_samples);
            const bool valid1 = i0 + 1 >= 0 && i0 + 1 < static_cast<std::int64_t>(n_samples);
            if (valid0) {
                const double w = 1.0 - fr;
                for (std::size_t jj = 0; jj < window; ++jj) s1[a_row + jj] += w * twiddle[jj];
            }
            if (valid1) {
                for (std::size_t jj = 0; jj < window; ++jj) s2[a_row + jj] += fr * twiddle[jj];
            }
            for (std::size_t jj = 0; jj < window; ++jj) twiddle[jj] *= step[jj];
        }

        // Fold in each shift's own phase so a single transform over the
        // shift axis evaluates all k at once.
        for (std::size_t a = 0; a < n_alpha; ++a) {
            double abs_a = static_cast<double>(rg.alpha_min) + static_cast<double>(a);
            for (std::size_t jj = 0; jj < window; ++jj) {
                double j = static_cast<double>(static_cast<int>(jj) - cap_neg);
                s1[a * window + jj] *=
                    std::polar(1.0, -two_pi * j * abs_a / static_cast<double>(n_samples));
                s2[a * window + jj] *= std::polar(
                    1.0, -two_pi * j * (abs_a + 1.0) / static_cast<double>(n_samples));
            }
        }

        for (std::size_t jj = 0; jj < window; ++jj) {
            std::fill(padded.begin(), padded.end(), std::complex<double>{0.0, 0.0});
            for (std::size_t a = 0; a < n_alpha; ++a) padded[a] = s1[a * window + jj];
            std::vector<std::complex<double>> f1 = fft::backward_unscaled(padded);
            std::fill(padded.begin(), padded.end(), std::complex<double>{0.0, 0.0});
            for (std::size_t a = 0; a < n_alpha; ++a) padded[a] = s2[a * window + jj];
            std::vector<std::complex<double>> f2 = fft::backward_unscaled(padded);
            for (std::size_t k_rel = 0; k_rel < kappa.count; ++k_rel) {
                const auto k = static_cast<double>(kappa.first + k_rel);
                const std::complex<double> rot = std::polar(
                    1.0, two_pi * k * static_cast<double>(rg.alpha_min) /
                             static_cast<double>(n_samples));
                const std::complex<double> wk =
                    std::polar(1.0, two_pi * k / static_cast<double>(n_samples));
                coeffs[k_rel * window + jj] =
                    rot * (f1[kappa.first + k_rel] + wk * f2[kappa.first + k_rel]) /
                    static_cast<double>(n_samples);
            }
        }

        // Greedy window growth per k.
        for (std::size_t k_rel = 0; k_rel < kappa.count; ++k_rel) {
            const std::complex<double>* r = &coeffs[k_rel * window];
            auto mag2 = [&](int j) {
                return std::norm(r[static_cast<std::size_t>(j + cap_neg)]);
            };
            const double total = energy.at(kappa.first + k_rel);
            int lo = 0, hi = 0;
            double retained = mag2(0);
            const double target = (1.0 - options.eps_q) * total;
            while (retained < target && (lo > -cap_neg || hi < cap_pos)) {
                const double left = lo > -cap_neg ? mag2(lo - 1) : -1.0;
                const double right = hi < cap_pos ? mag2(hi + 1) : -1.0;
                if (left >= right)
                    retained += mag2(--lo);
                else
                    retained += mag2(++hi);
            }
            const std::size_t i = table.idx(k_rel, m);
            table.win_lo[i] = lo;
            table.win_hi[i] = hi;
            table.pool_start[i] = table.pool.size();
            for (int j = lo; j <= hi; ++j)
                table.pool.push_back(r[static_cast<std::size_t>(j + cap_neg)]);
            table.dropped_energy[i] =
                total > 0.0 ? std::max(0.0, 1.0 - retained / total) : 0.0;
        }
    }
    return table;
}

// Summary numbers for budget reporting.
struct KernelStats {
    std::size_t kappa_size = 0;
    std::size_t nu_size = 0;
    double ratio = 0.0;       // |nu| / |kappa|
    std::size_t num_samples = 0;
    double reduction = 0.0;   // N / |nu|
    double max_dropped = 0.0; // worst per-(k,m) dropped energy fraction
};

inline KernelStats kernel_stats(const QKernelTable& table) {
    KernelStats st;
    st.kappa_size = table.kappa.count;
    st.nu_size = table.nu_union().size();
    st.ratio = static_cast<double>(st.nu_size) / static_cast<double>(st.kappa_size);
    st.num_samples = table.num_samples;
    st.reduction = static_cast<double>(st.num_samples) / static_cast<double>(st.nu_size);
    st.max_dropped = table.max_dropped_energy();
    return st;
}

// ---- binary cache -------------------------------------------------------

inline constexpr char kernel_magic[4] = {'S', 'N', 'Q', 'K'};
inline constexpr std::uint16_t kernel_format_version = 1;

namespace detail {

class Fnv1a {
public:
    void feed(const void* data, std::size_t size) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            hash_ ^= p[i];
            hash_ *= 1099511628211ULL;
        }
    }
    template <typename T>
    void feed_pod(T value) {
        feed(&value, sizeof(T));
    }
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = 14695981039346656037ULL;
};

} // namespace detail

// Content hash identifying a table build: geometry, grid, band, options.
inline std::uint64_t kernel_content_hash(const ArrayGeometry& geom, double theta,
                                         std::size_t n_samples, double sample_rate,
                                         const IndexBand& kappa,
                                         const KernelOptions& options) {
    detail::Fnv1a h;
    h.feed_pod(theta);
    h.feed_pod(n_samples);
    h.feed_pod(sample_rate);
    h.feed_pod(kappa.first);
    h.feed_pod(kappa.count);
    h.feed_pod(options.eps_q);
    h.feed_pod(options.cap_neg);
    h.feed_pod(options.cap_pos);
    h.feed_pod(geom.speed_of_sound);
    h.feed_pod(geom.reference_index);
    for (double d : geom.element_offsets) h.feed_pod(d);
    return h.value();
}

inline void write_kernel_table(const std::string& path, const QKernelTable& table,
                               std::uint64_t content_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw io_error("cannot open '" + path + "' for writing");
    out.write(kernel_magic, 4);
    detail::write_pod(out, kernel_format_version);
    detail::write_pod(out, content_hash);
    detail::write_pod(out, table.theta);
    detail::write_pod(out, table.eps_q);
    detail::write_pod(out, static_cast<std::int32_t>(table.cap_neg));
    detail::write_pod(out, static_cast<std::int32_t>(table.cap_pos));
    detail::write_pod(out, static_cast<std::uint64_t>(table.num_samples));
    detail::write_pod(out, table.sample_rate);
    detail::write_pod(out, static_cast<std::uint64_t>(table.num_elements));
    detail::write_pod(out, static_cast<std::uint64_t>(table.kappa.first));
    detail::write_pod(out, static_cast<std::uint64_t>(table.kappa.count));
    detail::write_pod(out, static_cast<std::uint64_t>(table.pool.size()));
    auto write_span = [&](const void* data, std::size_t bytes) {
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    };
    write_span(table.win_lo.data(), table.win_lo.size() * sizeof(std::int32_t));
    write_span(table.win_hi.data(), table.win_hi.size() * sizeof(std::int32_t));
    write_span(table.pool_start.data(), table.pool_start.size() * sizeof(std::uint64_t));
    write_span(table.dropped_energy.data(), table.dropped_energy.size() * sizeof(double));
    write_span(table.pool.data(), table.pool.size() * sizeof(std::complex<double>));
    if (!out)
        throw io_error("failed writing kernel table '" + path + "'");
}

// Reads a cached table. expected_hash guards against stale caches built
// from a different setup; pass 0 to skip the check.
inline QKernelTable read_kernel_table(const std::string& path,
                                      std::uint64_t expected_hash = 0) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error("cannot open kernel table '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kernel_magic, 4) != 0)
        throw io_error("'" + path + "' is not a kernel table file (bad magic)");
    auto version = detail::read_pod<std::uint16_t>(in, path);
    if (version != kernel_format_version)
        throw io_error("'" + path + "' has unsupported kernel format version " +
                       std::to_string(version));
    auto stored_hash = detail::read_pod<std::uint64_t>(in, path);
    if (expected_hash != 0 && stored_hash != expected_hash)
        throw io_error("'" + path + "' was built from a different setup (hash mismatch)");
    QKernelTable table;
    table.theta = detail::read_pod<double>(in, path);
    table.eps_q = detail::read_pod<double>(in, path);
    table.cap_neg = detail::read_pod<std::int32_t>(in, path);
    table.cap_pos = detail::read_pod<std::int32_t>(in, path);
    table.num_samples = detail::read_pod<std::uint64_t>(in, path);
    table.sample_rate = detail::read_pod<double>(in, path);
    table.num_elements = detail::read_pod<std::uint64_t>(in, path);
    table.kappa.first = detail::read_pod<std::uint64_t>(in, path);
    table.kappa.count = detail::read_pod<std::uint64_t>(in, path);
    auto pool_size = detail::read_pod<std::uint64_t>(in, path);
    std::size_t cells = table.kappa.count * table.num_elements;
    table.win_lo.resize(cells);
    table.win_hi.resize(cells);
    table.pool_start.resize(cells);
    table.dropped_energy.resize(cells);
    table.pool.resize(pool_size);
    auto read_span = [&](void* data, std::size_t bytes) {
        in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
        if (!in)
            throw io_error("truncated kernel table '" + path + "'");
    };
    read_span(table.win_lo.data(), cells * sizeof(std::int32_t));
    read_span(table.win_hi.data(), cells * sizeof(std::int32_t));
    read_span(table.pool_start.data(), cells * sizeof(std::uint64_t));
    read_span(table.dropped_energy.data(), cells * sizeof(double));
    read_span(table.pool.data(), pool_size * sizeof(std::complex<double>));
    for (std::size_t i = 0; i < cells; ++i) {
        if (table.win_hi[i] < table.win_lo[i] ||
            table.pool_start[i] + static_cast<std::size_t>(table.win_hi[i] -
                                                           table.win_lo[i] + 1) >
                pool_size)
            throw io_error("corrupt kernel table '" + path + "' (bad window layout)");
    }
    return table;
}

// Loads the table from cache_path when it matches the requested build;
// otherwise builds it and refreshes the cache.
inline QKernelTable load_or_build_kernel_table(const std::string& cache_path,
                                               const ArrayGeometry& geom,
                                               const ImagingConfig& cfg, double theta,
                                               const IndexBand& kappa,
                                               const KernelOptions& options = {}) {
    const GridSpec grid = derive_grid(cfg, geom);
    const std::uint64_t expected =
        kernel_content_hash(geom, theta, grid.num_samples, grid.sample_rate, kappa, options);
    {
        std::ifstream probe(cache_path, std::ios::binary);
        if (probe) {
            try {
                return read_kernel_table(cache_path, expected);
            } catch (const io_error&) {
                // stale or damaged cache, rebuild below
            }
        }
    }
    QKernelTable table = build_kernel_table(geom, cfg, theta, kappa, options);
    write_kernel_table(cache_path, table, expected);
    return table;
}

} // namespace subeam
