// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.
//
// Point-scatterer phantoms. Each scatterer is a reflection at a two-way
// reference delay t_l (seconds at the reference element) with a real
// amplitude. Speckle phantoms are generated with a self-contained RNG so
// identical seeds give identical phantoms on every platform.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "subeam/config.hpp"
#include "subeam/errors.hpp"

namespace subeam {

struct Scatterer {
    double delay = 0.0;     // t_l [s], two-way delay at the reference element
    double amplitude = 0.0; // b_l, dimensionless reflectivity
};

struct Phantom {
    std::vector<Scatterer> scatterers;
};

// Deterministic random source. Uniform and normal draws are computed
// from raw mt19937_64 output with fixed arithmetic, avoiding the
// implementation-defined std::*_distribution algorithms.
class DeterministicRng {
public:
    explicit DeterministicRng(std::uint64_t seed) : gen_(seed) {}

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform01(); // (0, 1], keeps log() finite
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Diffuse speckle: scatterer count is density (per mm of depth) times
// the imaged depth in mm, delays uniform over (0, T), amplitudes
// zero-mean Gaussian with the given standard deviation.
inline Phantom make_speckle_phantom(std::uint64_t seed, double density_per_mm,
                                    double amp_std, const GridSpec& grid,
                                    double speed_of_sound) {
    if (!(density_per_mm >= 0.0))
        throw config_error("speckle density: must be nonnegative");
    if (!(amp_std >= 0.0))
        throw config_error("speckle amp_std: must be nonnegative");
    Phantom phantom;
    double depth_mm = speed_of_sound * grid.duration / 2.0 * 1e3;
    auto count = static_cast<std::size_t>(std::llround(density_per_mm * depth_mm));
    phantom.scatterers.reserve(count);
    DeterministicRng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        double u = rng.uniform01();
        while (u == 0.0) u = rng.uniform01(); // open interval (0, T)
        Scatterer s;
        s.delay = u * grid.duration;
        s.amplitude = amp_std * rng.normal();
        phantom.scatterers.push_back(s);
    }
    return phantom;
}

// Reads a phantom description file. Each line is one entry:
//   scatterer delay=50us amp=1.0
//   scatterer range=40mm amp=-0.3
//   speckle seed=42 density=5 amp_std=0.05
// 'range' is one-way depth, converted to a two-way delay via 2r/c.
// '#' starts a comment. Speckle density is per mm of depth.
inline Phantom read_phantom_file(const std::string& path, const GridSpec& grid,
                                 double speed_of_sound) {
    std::ifstream in(path);
    if (!in)
        throw io_error("cannot open phantom file '" + path + "'");
    Phantom phantom;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::stringstream ss(detail::trim(line));
        std::string kind;
        ss >> kind;
        if (kind.empty()) continue;
        auto where = [&] { return path + ":" + std::to_string(lineno); };

        KeyValueMap fields;
        std::string tok;
        while (ss >> tok) {
            std::size_t eq = tok.find('=');
            if (eq == std::string::npos)
                throw config_error(where() + ": expected key=value, got '" + tok + "'");
            fields[tok.substr(0, eq)] = tok.substr(eq + 1);
        }

        if (kind == "scatterer") {
            if (fields.count("lateral"))
                throw config_error(where() +
                                   ": off-axis scatterers are not supported; scatterers "
                                   "lie on the beam axis of each direction");
            Scatterer s;
            if (fields.count("delay") && fields.count("range"))
                throw config_error(where() + ": give either delay or range, not both");
            if (fields.count("delay"))
                s.delay = parse_quantity(fields["delay"]);
            else if (fields.count("range"))
                s.delay = 2.0 * parse_quantity(fields["range"]) / speed_of_sound;
            else
                throw config_error(where() + ": scatterer needs delay= or range=");
            if (!fields.count("amp"))
                throw config_error(where() + ": scatterer needs amp=");
            s.amplitude = parse_quantity(fields["amp"]);
            phantom.scatterers.push_back(s);
        } else if (kind == "speckle") {
            for (const char* req : {"seed", "density", "amp_std"})
                if (!fields.count(req))
                    throw config_error(where() + ": speckle needs " + std::string(req) + "=");
            auto seed = static_cast<std::uint64_t>(std::stoull(fields["seed"]));
            Phantom speckle = make_speckle_phantom(seed, parse_quantity(fields["density"]),
                                                   parse_quantity(fields["amp_std"]), grid,
                                                   speed_of_sound);
            phantom.scatterers.insert(phantom.scatterers.end(),
                                      speckle.scatterers.begin(), speckle.scatterers.end());
        } else {
            throw config_error(where() + ": unknown entry '" + kind + "'");
        }
    }
    return phantom;
}

} // namespace subeam
