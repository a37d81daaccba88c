// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "subeam/config.hpp"
#include "subeam/image.hpp"
#include "subeam/phantom.hpp"
#include "subeam/simulate.hpp"
#include "subeam/time_beamform.hpp"

using namespace subeam;

namespace {

Setup small_setup(std::size_t num_elements) {
    Setup s;
    s.imaging.depth_r = 0.0493;
    s.imaging.carrier_f0 = 2e6;
    s.imaging.envelope_bandwidth = 1e6;
    s.imaging.sample_rate_fs = 8e6;
    s.imaging.directions = {0.0};
    s.geometry = uniform_linear_array(num_elements, 1540.0 / 2e6 / 2.0, 1540.0);
    return s;
}

} // namespace

TEST_CASE("the reference element delay map is the identity") {
    for (double t : {0.0, 1e-6, 5e-5, 2e-4})
        for (double theta : {-0.7, 0.0, 0.3})
            CHECK(element_delay(t, theta, 0.0) == t);
}

TEST_CASE("the delay map matches a hand-computed value") {
    // t = 100 us, gamma = 10 us, theta = pi/6.
    const double tau = element_delay(100e-6, std::numbers::pi / 6.0, 10e-6);
    CHECK(tau == Catch::Approx(9.582575694955840e-5).epsilon(1e-14));

    std::vector<double> times{100e-6, 50e-6};
    auto taus = delay_map(times, std::numbers::pi / 6.0, 10e-6);
    REQUIRE(taus.size() == 2);
    CHECK(taus[0] == tau);
}

TEST_CASE("the delay map is increasing in beam time and bounded below") {
    for (double gamma : {-8e-6, 3e-6, 12e-6}) {
        for (double theta : {-0.6, 0.0, 0.5}) {
            double prev = element_delay(0.0, theta, gamma);
            CHECK(prev >= std::abs(gamma) - 1e-18);
            for (int i = 1; i <= 64; ++i) {
                double t = 2e-4 * static_cast<double>(i) / 64.0;
                double tau = element_delay(t, theta, gamma);
                CHECK(tau > prev);
                CHECK(tau >= t / 2.0);
                prev = tau;
            }
        }
    }
}

TEST_CASE("a single reference element passes through unchanged") {
    Setup s = small_setup(1);
    const GridSpec grid = derive_grid(s.imaging, s.geometry);
    Phantom ph;
    ph.scatterers = {{20e-6, 1.0}, {41e-6, -0.5}};
    ChannelFrame frame = simulate_channels(ph, s.geometry, s.imaging, 0.0);
    BeamformedLine line = beamform_time(frame, s.geometry, grid);
    // gamma = 0 reads land exactly on the grid, so the "beamformed"
    // line is the single channel itself.
    for (std::size_t n = 0; n < grid.num_samples; ++n)
        CHECK(line.row(0)[n] == Catch::Approx(frame.row(0)[n]).margin(1e-12));
}

TEST_CASE("simulation places the reference-element echo at the scatterer delay") {
    Setup s = small_setup(8);
    const GridSpec grid = derive_grid(s.imaging, s.geometry);
    const PulseModel pulse = make_pulse(s.imaging);
    const double t0 = 160.0 / grid.sample_rate; // on-grid delay
    Phantom ph;
    ph.scatterers = {{t0, 0.8}};
    ChannelFrame frame = simulate_channels(ph, s.geometry, s.imaging, 0.2);
    const std::size_t m0 = s.geometry.reference_index;
    for (std::size_t n = 150; n <= 170; ++n)
        CHECK(frame.at(m0, n) ==
              Catch::Approx(0.8 * pulse.value(grid.time(n) - t0)).margin(1e-12));
    // Off-reference elements see the echo later (tau >= t at theta=0.2
    // for these offsets) and not at the reference position.
    CHECK(frame.at(m0, 160) == Catch::Approx(0.8).margin(1e-12));
}

TEST_CASE("beamforming refocuses echoes onto the scatterer delay") {
    Setup s = small_setup(8);
    const GridSpec grid = derive_grid(s.imaging, s.geometry);
    const double t0 = 160.0 / grid.sample_rate;
    Phantom ph;
    ph.scatterers = {{t0, 1.0}};
    for (double theta : {-0.4, 0.0, 0.3}) {
        ChannelFrame frame = simulate_channels(ph, s.geometry, s.imaging, theta);
        BeamformedLine line = beamform_time(frame, s.geometry, grid);
        std::vector<double> env = envelope(line.samples);
        std::size_t peak = 0;
        for (std::size_t n = 1; n < env.size(); ++n)
            if (env[n] > env[peak]) peak = n;
        CHECK(std::abs(static_cast<long long>(peak) - 160) <= 1);
        CHECK(env[peak] > 0.8);
    }
}

TEST_CASE("time beamforming is linear in the channel data") {
    Setup s = small_setup(8);
    const GridSpec grid = derive_grid(s.imaging, s.geometry);
    Phantom pa, pb;
    pa.scatterers = {{20e-6, 1.0}};
    pb.scatterers = {{35e-6, 0.7}, {50e-6, -0.4}};
    const double theta = 0.25;
    ChannelFrame fa = simulate_channels(pa, s.geometry, s.imaging, theta);
    ChannelFrame fb = simulate_channels(pb, s.geometry, s.imaging, theta);
    ChannelFrame fc = make_frame(8, grid.num_samples, theta, grid.sample_rate);
    const double a = 1.3, b = -2.1;
    for (std::size_t i = 0; i < fc.samples.size(); ++i)
        fc.samples[i] = a * fa.samples[i] + b * fb.samples[i];

    BeamformedLine la = beamform_time(fa, s.geometry, grid);
    BeamformedLine lb = beamform_time(fb, s.geometry, grid);
    BeamformedLine lc = beamform_time(fc, s.geometry, grid);
    double worst = 0.0;
    for (std::size_t n = 0; n < grid.num_samples; ++n)
        worst = std::max(worst,
                         std::abs(lc.row(0)[n] - (a * la.row(0)[n] + b * lb.row(0)[n])));
    CHECK(worst < 1e-10);
}

TEST_CASE("reads past the recorded window are dropped per half") {
    Setup s = small_setup(2);
    // Offsets {-pitch, 0}: element 0 has gamma < 0.
    const GridSpec grid = derive_grid(s.imaging, s.geometry);
    ChannelFrame frame = make_frame(2, grid.num_samples, 0.0, grid.sample_rate);
    for (std::size_t n = 0; n < grid.num_samples; ++n) {
        frame.at(0, n) = 1.0;
        frame.at(1, n) = 1.0;
    }
    BeamformedLine line = beamform_time(frame, s.geometry, grid);
    // At theta = 0 both tau maps stay inside the window except at the
    // very end, where the off-reference read can straddle the edge.
    CHECK(line.row(0)[grid.num_samples / 2] == Catch::Approx(1.0).margin(1e-12));
    for (std::size_t n = 0; n < grid.num_samples; ++n) {
        CHECK(std::isfinite(line.row(0)[n]));
        CHECK(line.row(0)[n] <= 1.0 + 1e-12);
    }
    // At the last sample the off-reference read straddles the window
    // edge; its upper half is dropped, so the average falls below one.
    CHECK(line.row(0)[grid.num_samples - 1] < 1.0 - 1e-4);
}

TEST_CASE("beamforming rejects mismatched inputs") {
    Setup s = small_setup(4);
    const GridSpec grid = derive_grid(s.imaging, s.geometry);
    ChannelFrame frame = make_frame(3, grid.num_samples, 0.0, grid.sample_rate);
    CHECK_THROWS_AS(beamform_time(frame, s.geometry, grid), structural_error);
    ChannelFrame frame2 = make_frame(4, grid.num_samples - 1, 0.0, grid.sample_rate);
    CHECK_THROWS_AS(beamform_time(frame2, s.geometry, grid), structural_error);
}

TEST_CASE("simulation rejects scatterers outside the window") {
    Setup s = small_setup(2);
    Phantom ph;
    ph.scatterers = {{-1e-6, 1.0}};
    CHECK_THROWS_AS(simulate_channels(ph, s.geometry, s.imaging, 0.0), config_error);
    ph.scatterers = {{10e-6, 1.0}, {1.0, 1.0}};
    try {
        simulate_channels(ph, s.geometry, s.imaging, 0.0);
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("scatterer 1") != std::string::npos);
    }
    ph.scatterers = {{10e-6, std::nan("")}};
    CHECK_THROWS_AS(simulate_channels(ph, s.geometry, s.imaging, 0.0), config_error);
}

TEST_CASE("channel noise is seeded and scales with the requested snr") {
    Setup s = small_setup(4);
    Phantom ph;
    ph.scatterers = {{30e-6, 1.0}};
    SimulateOptions opt;
    opt.noise_snr_db = 20.0;
    opt.noise_seed = 11;
    ChannelFrame noisy1 = simulate_channels(ph, s.geometry, s.imaging, 0.0, opt);
    ChannelFrame noisy2 = simulate_channels(ph, s.geometry, s.imaging, 0.0, opt);
    CHECK(noisy1.samples == noisy2.samples);

    ChannelFrame clean = simulate_channels(ph, s.geometry, s.imaging, 0.0);
    double sig_sq = 0.0, noise_sq = 0.0;
    for (std::size_t i = 0; i < clean.samples.size(); ++i) {
        sig_sq += clean.samples[i] * clean.samples[i];
        double d = noisy1.samples[i] - clean.samples[i];
        noise_sq += d * d;
    }
    double snr_db = 10.0 * std::log10(sig_sq / noise_sq);
    CHECK(snr_db == Catch::Approx(20.0).margin(1.0));

    opt.noise_seed = 12;
    ChannelFrame other = simulate_channels(ph, s.geometry, s.imaging, 0.0, opt);
    CHECK(other.samples != noisy1.samples);
}

TEST_CASE("spreading attenuates off-reference echoes only") {
    Setup s = small_setup(8);
    const GridSpec grid = derive_grid(s.imaging, s.geometry);
    const double t0 = 160.0 / grid.sample_rate;
    Phantom ph;
    ph.scatterers = {{t0, 1.0}};
    SimulateOptions opt;
    opt.spreading = true;
    ChannelFrame spread = simulate_channels(ph, s.geometry, s.imaging, 0.0, opt);
    ChannelFrame flat = simulate_channels(ph, s.geometry, s.imaging, 0.0);
    const std::size_t m0 = s.geometry.reference_index;
    for (std::size_t n = 0; n < grid.num_samples; ++n)
        CHECK(spread.at(m0, n) == flat.at(m0, n));
    // The farthest element integrates slightly less energy.
    double e_spread = 0.0, e_flat = 0.0;
    for (std::size_t n = 0; n < grid.num_samples; ++n) {
        e_spread += spread.at(0, n) * spread.at(0, n);
        e_flat += flat.at(0, n) * flat.at(0, n);
    }
    CHECK(e_spread < e_flat);
}
