// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <vector>

#include "subeam/config.hpp"
#include "subeam/freq_kernel.hpp"
#include "subeam/time_beamform.hpp"

using namespace subeam;

namespace {

Setup kernel_setup() {
    Setup s;
    s.imaging.depth_r = 0.0124; // floor(T * fs) = 128
    s.imaging.carrier_f0 = 2e6;
    s.imaging.envelope_bandwidth = 1e6;
    s.imaging.sample_rate_fs = 8e6;
    s.imaging.directions = {0.0};
    // Wide pitch so off-reference reads shift by several samples.
    s.geometry = uniform_linear_array(3, 1.54e-3, 1540.0);
    return s;
}

// Direct O(N^2) rebuild of one (k, m) cell: scatter the interpolation
// weights with their phases, transform by brute force, and grow the
// offset window with the same greedy rule. Serves as an independent
// reference for the factored builder.
struct DirectCell {
    std::int32_t lo = 0, hi = 0;
    std::vector<std::complex<double>> coeffs; // R[j] for j in [lo, hi]
    double dropped = 0.0;
};

DirectCell direct_cell(const GridSpec& grid, double theta, double gamma, std::size_t k,
                       const KernelOptions& opt) {
    const std::size_t n = grid.num_samples;
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<std::complex<double>> chi(n);
    for (std::size_t i = 0; i < n; ++i) chi[i] = {0.0, 0.0};
    for (std::size_t s = 0; s < n; ++s) {
        double p = element_delay(grid.time(s), theta, gamma) * grid.sample_rate;
        double fl = std::floor(p);
        auto i0 = static_cast<long long>(fl);
        double fr = p - fl;
        auto phase = [&](long long i) {
            return std::polar(1.0, two_pi * static_cast<double>(k) *
                                       static_cast<double>(i - static_cast<long long>(s)) /
                                       static_cast<double>(n));
        };
        if (i0 >= 0 && i0 < static_cast<long long>(n))
            chi[static_cast<std::size_t>(i0)] += (1.0 - fr) * phase(i0);
        if (i0 + 1 >= 0 && i0 + 1 < static_cast<long long>(n))
            chi[static_cast<std::size_t>(i0 + 1)] += fr * phase(i0 + 1);
    }
    double total = 0.0;
    for (const auto& v : chi) total += std::norm(v);
    total /= static_cast<double>(n);

    auto r_at = [&](int j) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i)
            acc += chi[i] * std::polar(1.0, -two_pi * static_cast<double>(j) *
                                                static_cast<double>(i) /
                                                static_cast<double>(n));
        return acc / static_cast<double>(n);
    };
    std::vector<std::complex<double>> window(
        static_cast<std::size_t>(opt.cap_neg + opt.cap_pos + 1));
    for (int j = -opt.cap_neg; j <= opt.cap_pos; ++j)
        window[static_cast<std::size_t>(j + opt.cap_neg)] = r_at(j);
    auto mag2 = [&](int j) { return std::norm(window[static_cast<std::size_t>(j + opt.cap_neg)]); };

    DirectCell cell;
    int lo = 0, hi = 0;
    double retained = mag2(0);
    const double target = (1.0 - opt.eps_q) * total;
    while (retained < target && (lo > -opt.cap_neg || hi < opt.cap_pos)) {
        double left = lo > -opt.cap_neg ? mag2(lo - 1) : -1.0;
        double right = hi < opt.cap_pos ? mag2(hi + 1) : -1.0;
        if (left >= right)
            retained += mag2(--lo);
        else
            retained += mag2(++hi);
    }
    cell.lo = lo;
    cell.hi = hi;
    for (int j = lo; j <= hi; ++j)
        cell.coeffs.push_back(window[static_cast<std::size_t>(j + opt.cap_neg)]);
    cell.dropped = total > 0.0 ? std::max(0.0, 1.0 - retained / total) : 0.0;
    return cell;
}

} // namespace

TEST_CASE("kernel options are validated") {
    KernelOptions opt;
    opt.eps_q = 0.0;
    CHECK_THROWS_AS(validate_kernel_options(opt), config_error);
    opt.eps_q = 1.0;
    CHECK_THROWS_AS(validate_kernel_options(opt), config_error);
    opt.eps_q = 1e-3;
    opt.cap_neg = -1;
    CHECK_THROWS_AS(validate_kernel_options(opt), config_error);
    opt.cap_neg = 0;
    opt.cap_pos = -2;
    CHECK_THROWS_AS(validate_kernel_options(opt), config_error);
}

TEST_CASE("the continuous kernel matches a hand-computed value") {
    Setup s = kernel_setup();
    s.imaging.depth_r = 0.0493;
    s.imaging.sample_rate_fs = 8e6;
    const GridSpec grid = derive_grid(s.imaging, s.geometry);
    // k = 0 removes the phase; the amplitude is 1 + gamma^2 / t^2 at
    // theta = 0, which is 1.04 for gamma = 10 us and t = 50 us.
    std::complex<double> q = eval_q(50e-6, 0, 0.0, 10e-6, grid);
    CHECK(q.real() == 1.04);
    CHECK(q.imag() == 0.0);
}

TEST_CASE("the continuous kernel vanishes outside its support") {
    Setup s = kernel_setup();
    const GridSpec grid = derive_grid(s.imaging, s.geometry);
    const double gamma = 2e-6;
    const double upper = element_delay(grid.period(), 0.2, gamma);
    CHECK(eval_q(gamma * 0.999, 5, 0.2, gamma, grid) == std::complex<double>{0.0, 0.0});
    CHECK(eval_q(upper, 5, 0.2, gamma, grid) == std::complex<double>{0.0, 0.0});
    CHECK(eval_q(upper * 1.5, 5, 0.2, gamma, grid) == std::complex<double>{0.0, 0.0});
    CHECK(eval_q(gamma, 5, 0.2, gamma, grid) != std::complex<double>{0.0, 0.0});
}

TEST_CASE("the continuous kernel is one for the reference element") {
    Setup s = kernel_setup();
    const GridSpec grid = derive_grid(s.imaging, s.geometry);
    for (std::size_t k : {std::size_t{0}, std::size_t{3}, std::size_t{40}})
        for (double t : {1e-6, 5e-6, 1.2e-5})
            CHECK(eval_q(t, k, 0.4, 0.0, grid) == std::complex<double>{1.0, 0.0});
}

TEST_CASE("the reference element's table row is a unit impulse") {
    Setup s = kernel_setup();
    IndexBand kappa{28, 8};
    QKernelTable table = build_kernel_table(s.geometry, s.imaging, 0.3, kappa);
    const std::size_t m0 = s.geometry.reference_index;
    for (std::size_t k_rel = 0; k_rel < kappa.count; ++k_rel) {
        std::size_t i = table.idx(k_rel, m0);
        REQUIRE(table.win_lo[i] == 0);
        REQUIRE(table.win_hi[i] == 0);
        std::complex<double> r0 = table.coeff(k_rel, m0, 0);
        CHECK(std::abs(r0 - std::complex<double>{1.0, 0.0}) < 1e-12);
        CHECK(table.dropped_energy[i] < 1e-12);
    }
}

TEST_CASE("the factored builder matches a direct per-bin rebuild") {
    Setup s = kernel_setup();
    const GridSpec grid = derive_grid(s.imaging, s.geometry);
    IndexBand kappa{28, 8};
    KernelOptions opt;
    opt.eps_q = 1e-3;
    opt.cap_neg = 24;
    opt.cap_pos = 8;
    const double theta = 0.3;
    QKernelTable table = build_kernel_table(s.geometry, s.imaging, theta, kappa, opt);
    for (std::size_t m = 0; m < s.geometry.num_elements(); ++m) {
        const double gamma = s.geometry.gamma(m);
        for (std::size_t k_rel = 0; k_rel < kappa.count; ++k_rel) {
            DirectCell ref = direct_cell(grid, theta, gamma, kappa.first + k_rel, opt);
            std::size_t i = table.idx(k_rel, m);
            REQUIRE(table.win_lo[i] == ref.lo);
            REQUIRE(table.win_hi[i] == ref.hi);
            for (std::int32_t j = ref.lo; j <= ref.hi; ++j)
                CHECK(std::abs(table.coeff(k_rel, m, j) -
                               ref.coeffs[static_cast<std::size_t>(j - ref.lo)]) < 1e-10);
            CHECK(table.dropped_energy[i] ==
                  Catch::Approx(ref.dropped).margin(1e-9));
        }
    }
}

TEST_CASE("broadside tables are mirror symmetric across the array") {
    Setup s = kernel_setup();
    IndexBand kappa{28, 8};
    QKernelTable table = build_kernel_table(s.geometry, s.imaging, 0.0, kappa);
    // Offsets are {-d, 0, +d}; at theta = 0 the delay map depends on
    // |gamma| only, so the outer rows coincide.
    for (std::size_t k_rel = 0; k_rel < kappa.count; ++k_rel) {
        std::size_t a = table.idx(k_rel, 0);
        std::size_t b = table.idx(k_rel, 2);
        REQUIRE(table.win_lo[a] == table.win_lo[b]);
        REQUIRE(table.win_hi[a] == table.win_hi[b]);
        for (std::int32_t j = table.win_lo[a]; j <= table.win_hi[a]; ++j)
            CHECK(table.coeff(k_rel, 0, j) == table.coeff(k_rel, 2, j));
    }
}

TEST_CASE("offset windows respect the caps and the energy target") {
    Setup s = kernel_setup();
    IndexBand kappa{28, 8};
    KernelOptions opt;
    opt.eps_q = 1e-3;
    opt.cap_neg = 3;
    opt.cap_pos = 2;
    QKernelTable table = build_kernel_table(s.geometry, s.imaging, 0.25, kappa, opt);
    bool some_uncapped = false;
    for (std::size_t i = 0; i < table.win_lo.size(); ++i) {
        CHECK(table.win_lo[i] >= -opt.cap_neg);
        CHECK(table.win_hi[i] <= opt.cap_pos);
        CHECK(table.win_lo[i] <= 0);
        CHECK(table.win_hi[i] >= 0);
        CHECK(table.dropped_energy[i] >= 0.0);
        CHECK(table.dropped_energy[i] <= 1.0);
        bool capped = table.win_lo[i] == -opt.cap_neg && table.win_hi[i] == opt.cap_pos;
        if (!capped) {
            some_uncapped = true;
            CHECK(table.dropped_energy[i] <= opt.eps_q + 1e-15);
        }
    }
    CHECK(some_uncapped);
}

TEST_CASE("budget summaries follow from the table") {
    Setup s = kernel_setup();
    IndexBand kappa{28, 8};
    QKernelTable table = build_kernel_table(s.geometry, s.imaging, 0.3, kappa);
    KernelStats st = kernel_stats(table);
    CHECK(st.kappa_size == 8);
    CHECK(st.num_samples == 128);
    std::vector<std::size_t> nu = table.nu_union();
    CHECK(st.nu_size == nu.size());
    CHECK(st.ratio == static_cast<double>(nu.size()) / 8.0);
    CHECK(st.reduction == 128.0 / static_cast<double>(nu.size()));
    double worst = 0.0;
    for (double d : table.dropped_energy) worst = std::max(worst, d);
    CHECK(st.max_dropped == worst);
    for (std::size_t i = 1; i < nu.size(); ++i) CHECK(nu[i - 1] < nu[i]);
}

TEST_CASE("per-bin channel budgets enumerate the offset hull") {
    Setup s = kernel_setup();
    IndexBand kappa{28, 8};
    QKernelTable table = build_kernel_table(s.geometry, s.imaging, 0.3, kappa);
    const std::size_t k_rel = 3;
    std::int32_t lo, hi;
    table.offset_hull(k_rel, lo, hi);
    std::vector<std::size_t> nu = table.nu_of_k(k_rel);
    REQUIRE(nu.size() == static_cast<std::size_t>(hi - lo + 1));
    auto n = static_cast<std::int64_t>(table.num_samples);
    for (std::int32_t j = lo; j <= hi; ++j) {
        std::int64_t bin = (static_cast<std::int64_t>(kappa.first + k_rel) - j) % n;
        if (bin < 0) bin += n;
        CHECK(nu[static_cast<std::size_t>(j - lo)] == static_cast<std::size_t>(bin));
    }
    std::vector<std::size_t> sub = table.nu_union_of({kappa.first + k_rel});
    std::vector<std::size_t> sorted = nu;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sub == sorted);
    CHECK_THROWS_AS(table.nu_union_of({kappa.first + kappa.count}), structural_error);
}

TEST_CASE("the content hash separates distinct builds") {
    Setup s = kernel_setup();
    const GridSpec grid = derive_grid(s.imaging, s.geometry);
    IndexBand kappa{28, 8};
    KernelOptions opt;
    auto base = kernel_content_hash(s.geometry, 0.3, grid.num_samples, grid.sample_rate,
                                    kappa, opt);
    CHECK(base == kernel_content_hash(s.geometry, 0.3, grid.num_samples, grid.sample_rate,
                                      kappa, opt));
    CHECK(base != kernel_content_hash(s.geometry, 0.31, grid.num_samples, grid.sample_rate,
                                      kappa, opt));
    IndexBand other{29, 8};
    CHECK(base != kernel_content_hash(s.geometry, 0.3, grid.num_samples, grid.sample_rate,
                                      other, opt));
    KernelOptions opt2 = opt;
    opt2.cap_pos = 9;
    CHECK(base != kernel_content_hash(s.geometry, 0.3, grid.num_samples, grid.sample_rate,
                                      kappa, opt2));
    ArrayGeometry g2 = s.geometry;
    g2.element_offsets[0] *= 1.0 + 1e-12;
    CHECK(base != kernel_content_hash(g2, 0.3, grid.num_samples, grid.sample_rate, kappa,
                                      opt));
}

TEST_CASE("kernel tables survive a cache roundtrip bit for bit") {
    Setup s = kernel_setup();
    IndexBand kappa{28, 8};
    QKernelTable table = build_kernel_table(s.geometry, s.imaging, 0.3, kappa);
    const std::string path = "kernel_roundtrip_test.snqk";
    write_kernel_table(path, table, 77);
    QKernelTable back = read_kernel_table(path, 77);
    CHECK(back.theta == table.theta);
    CHECK(back.eps_q == table.eps_q);
    CHECK(back.cap_neg == table.cap_neg);
    CHECK(back.cap_pos == table.cap_pos);
    CHECK(back.num_samples == table.num_samples);
    CHECK(back.sample_rate == table.sample_rate);
    CHECK(back.num_elements == table.num_elements);
    CHECK(back.kappa.first == table.kappa.first);
    CHECK(back.kappa.count == table.kappa.count);
    CHECK(back.win_lo == table.win_lo);
    CHECK(back.win_hi == table.win_hi);
    CHECK(back.pool_start == table.pool_start);
    CHECK(back.dropped_energy == table.dropped_energy);
    CHECK(back.pool == table.pool);
    CHECK_THROWS_AS(read_kernel_table(path, 78), io_error);
    QKernelTable unchecked = read_kernel_table(path);
    CHECK(unchecked.pool == table.pool);
    std::remove(path.c_str());
}

TEST_CASE("damaged kernel caches are rejected") {
    const std::string path = "kernel_damaged_test.snqk";
    {
        std::ofstream out(path, std::ios::binary);
        out.write("NOPE", 4);
    }
    CHECK_THROWS_AS(read_kernel_table(path), io_error);
    {
        std::ofstream out(path, std::ios::binary);
        out.write(kernel_magic, 4);
        std::uint16_t v = kernel_format_version;
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    CHECK_THROWS_AS(read_kernel_table(path), io_error);
    CHECK_THROWS_AS(read_kernel_table("kernel_missing_test.snqk"), io_error);
    std::remove(path.c_str());
}

TEST_CASE("the cache loader rebuilds over stale files") {
    Setup s = kernel_setup();
    IndexBand kappa{28, 8};
    const std::string path = "kernel_cache_test.snqk";
    std::remove(path.c_str());
    QKernelTable built =
        load_or_build_kernel_table(path, s.geometry, s.imaging, 0.3, kappa);
    QKernelTable cached =
        load_or_build_kernel_table(path, s.geometry, s.imaging, 0.3, kappa);
    CHECK(cached.pool == built.pool);
    // A different direction hashes differently, so the stale file is
    // replaced rather than trusted.
    QKernelTable other =
        load_or_build_kernel_table(path, s.geometry, s.imaging, 0.25, kappa);
    CHECK(other.theta == 0.25);
    QKernelTable reread = read_kernel_table(path);
    CHECK(reread.theta == 0.25);
    {
        std::ofstream out(path, std::ios::binary);
        out.write("garbage", 7);
    }
    QKernelTable rebuilt =
        load_or_build_kernel_table(path, s.geometry, s.imaging, 0.3, kappa);
    CHECK(rebuilt.pool == built.pool);
    std::remove(path.c_str());
}

TEST_CASE("kernel builds reject bad bands") {
    Setup s = kernel_setup();
    CHECK_THROWS_AS(build_kernel_table(s.geometry, s.imaging, 0.0, IndexBand{0, 0}),
                    config_error);
    CHECK_THROWS_AS(build_kernel_table(s.geometry, s.imaging, 0.0, IndexBand{120, 16}),
                    config_error);
}
