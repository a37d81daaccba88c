// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>

#include "subeam/config.hpp"
#include "subeam/phantom.hpp"
#include "subeam/pulse.hpp"

using namespace subeam;

namespace {

GridSpec small_grid() {
    ImagingConfig cfg;
    cfg.depth_r = 0.0493;
    cfg.sample_rate_fs = 8e6;
    return derive_grid(cfg, uniform_linear_array(2, 0.25e-3, 1540.0));
}

} // namespace

TEST_CASE("pulse peaks at the origin and dies beyond its support") {
    PulseModel p;
    p.carrier_f0 = 3.1e6;
    p.envelope_bandwidth = 2e6;
    CHECK(p.value(0.0) == 1.0);
    CHECK(p.envelope_value(0.0) == 1.0);
    CHECK(p.value(p.support_halfwidth() * 1.01) == 0.0);
    CHECK(p.value(-p.support_halfwidth() * 1.01) == 0.0);
    CHECK(p.sigma_f() == Catch::Approx(2e6 / 5.5));
    CHECK(p.sigma_t() == Catch::Approx(1.0 / (2.0 * std::numbers::pi * p.sigma_f())));
    // Carrier oscillation under the envelope.
    double quarter = 1.0 / (4.0 * p.carrier_f0);
    CHECK(std::abs(p.value(quarter)) < 1e-6 + 1e-12);
    CHECK(p.value(2.0 * quarter) < 0.0);
}

TEST_CASE("pulse envelope spectrum stays inside the declared band") {
    PulseModel p;
    p.carrier_f0 = 3.1e6;
    p.envelope_bandwidth = 2e6;
    ImagingConfig cfg;
    cfg.depth_r = 0.16;
    cfg.carrier_f0 = p.carrier_f0;
    cfg.envelope_bandwidth = p.envelope_bandwidth;
    cfg.sample_rate_fs = 16e6;
    GridSpec grid = derive_grid(cfg, uniform_linear_array(2, 0.25e-3, 1540.0));
    SampledPulse sampled = sample_pulse(p, grid);

    // Energy within f0 +- bw/2 versus total, one-sided.
    double in_band = 0.0, total = 0.0;
    for (std::size_t k = 0; k <= grid.num_samples / 2; ++k) {
        double f = grid.dft_freq(k);
        double e = std::norm(sampled.h_dft[k]);
        total += e;
        if (f >= p.carrier_f0 - p.envelope_bandwidth / 2.0 &&
            f <= p.carrier_f0 + p.envelope_bandwidth / 2.0)
            in_band += e;
    }
    CHECK(in_band / total > 0.99);
}

TEST_CASE("pulse sampling wraps the left tail to the window end") {
    PulseModel p;
    p.carrier_f0 = 2e6;
    p.envelope_bandwidth = 1e6;
    GridSpec grid = small_grid();
    SampledPulse sampled = sample_pulse(p, grid);
    REQUIRE(sampled.h.size() == grid.num_samples);
    CHECK(sampled.h[0] == 1.0);
    const std::size_t n = grid.num_samples;
    // h[n-1] sits on a carrier zero crossing, so compare absolutely.
    CHECK(sampled.h[n - 1] == Catch::Approx(p.value(-1.0 / grid.sample_rate)).margin(1e-12));
    CHECK(sampled.h[n - 2] == Catch::Approx(p.value(-2.0 / grid.sample_rate)).epsilon(1e-9));
    // Mid-window samples sit far outside the support.
    CHECK(sampled.h[n / 2] == 0.0);
}

TEST_CASE("pulses violating Nyquist are rejected") {
    ImagingConfig cfg;
    cfg.carrier_f0 = 3.9e6;
    cfg.envelope_bandwidth = 1e6;
    cfg.sample_rate_fs = 8e6;
    CHECK_THROWS_AS(make_pulse(cfg), config_error);
}

TEST_CASE("deterministic rng repeats per seed and varies across seeds") {
    DeterministicRng a(123), b(123), c(124);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 256; ++i) {
        double va = a.uniform01();
        double vb = b.uniform01();
        double vc = c.uniform01();
        all_equal = all_equal && (va == vb);
        any_diff = any_diff || (va != vc);
        CHECK(va >= 0.0);
        CHECK(va < 1.0);
    }
    CHECK(all_equal);
    CHECK(any_diff);

    DeterministicRng n(9);
    double sum = 0.0, sum_sq = 0.0;
    const int count = 20000;
    for (int i = 0; i < count; ++i) {
        double v = n.normal();
        sum += v;
        sum_sq += v * v;
    }
    double mean = sum / count;
    double var = sum_sq / count - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("speckle phantoms have the expected count and window") {
    GridSpec grid = small_grid();
    const double c = 1540.0;
    Phantom ph = make_speckle_phantom(42, 5.0, 0.05, grid, c);
    const double depth_mm = c * grid.duration / 2.0 * 1e3;
    CHECK(ph.scatterers.size() ==
          static_cast<std::size_t>(std::llround(5.0 * depth_mm)));
    for (const auto& s : ph.scatterers) {
        CHECK(s.delay > 0.0);
        CHECK(s.delay < grid.duration);
    }

    Phantom again = make_speckle_phantom(42, 5.0, 0.05, grid, c);
    REQUIRE(again.scatterers.size() == ph.scatterers.size());
    for (std::size_t i = 0; i < ph.scatterers.size(); ++i) {
        CHECK(again.scatterers[i].delay == ph.scatterers[i].delay);
        CHECK(again.scatterers[i].amplitude == ph.scatterers[i].amplitude);
    }

    Phantom other = make_speckle_phantom(43, 5.0, 0.05, grid, c);
    bool differs = false;
    for (std::size_t i = 0; i < std::min(other.scatterers.size(), ph.scatterers.size()); ++i)
        differs = differs || other.scatterers[i].delay != ph.scatterers[i].delay;
    CHECK(differs);

    CHECK_THROWS_AS(make_speckle_phantom(1, -1.0, 0.05, grid, c), config_error);
    CHECK_THROWS_AS(make_speckle_phantom(1, 5.0, -0.1, grid, c), config_error);
}

TEST_CASE("phantom files parse scatterer and speckle entries") {
    GridSpec grid = small_grid();
    const std::string path = "phantom_parse_test.txt";
    {
        std::ofstream out(path);
        out << "# demo\n";
        out << "scatterer delay=12us amp=1.0\n";
        out << "scatterer range=23mm amp=-0.3\n";
        out << "speckle seed=7 density=1 amp_std=0.01\n";
    }
    Phantom ph = read_phantom_file(path, grid, 1540.0);
    REQUIRE(ph.scatterers.size() >= 2);
    CHECK(ph.scatterers[0].delay == Catch::Approx(12e-6));
    CHECK(ph.scatterers[0].amplitude == 1.0);
    CHECK(ph.scatterers[1].delay == Catch::Approx(2.0 * 0.023 / 1540.0));
    CHECK(ph.scatterers[1].amplitude == Catch::Approx(-0.3));
    const double depth_mm = 1540.0 * grid.duration / 2.0 * 1e3;
    CHECK(ph.scatterers.size() ==
          2 + static_cast<std::size_t>(std::llround(depth_mm)));
    std::remove(path.c_str());
}

TEST_CASE("phantom files reject malformed entries") {
    GridSpec grid = small_grid();
    auto expect_throw = [&](const std::string& content) {
        const std::string path = "phantom_bad_test.txt";
        {
            std::ofstream out(path);
            out << content;
        }
        CHECK_THROWS_AS(read_phantom_file(path, grid, 1540.0), config_error);
        std::remove(path.c_str());
    };
    expect_throw("scatterer delay=10us range=10mm amp=1\n");
    expect_throw("scatterer amp=1\n");
    expect_throw("scatterer delay=10us\n");
    expect_throw("scatterer delay=10us lateral=2mm amp=1\n");
    expect_throw("blob delay=10us amp=1\n");
    expect_throw("scatterer delay 10us amp=1\n");
    CHECK_THROWS_AS(read_phantom_file("missing_phantom.txt", grid, 1540.0), io_error);
}
