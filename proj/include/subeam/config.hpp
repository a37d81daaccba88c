// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.
//
// Imaging setup: array geometry, acquisition parameters, beam directions,
// and the time/frequency grid derived from them. All values are SI once
// parsed; config files carry explicit unit suffixes.

#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "subeam/errors.hpp"

namespace subeam {

// Receive array described by per-element offsets along the aperture.
// Offsets are measured from the reference element, which must sit at
// offset zero exactly so that its delay map is the identity.
struct ArrayGeometry {
    std::vector<double> element_offsets; // [m], length M
    double speed_of_sound = 1540.0;      // [m/s]
    std::size_t reference_index = 0;     // m0, offset exactly 0 at this index

    std::size_t num_elements() const { return element_offsets.size(); }

    // One-way offset delay gamma_m = delta_m / c in seconds.
    double gamma(std::size_t m) const { return element_offsets[m] / speed_of_sound; }
};

// Acquisition and display parameters for one imaging run.
struct ImagingConfig {
    double depth_r = 0.16;             // [m], imaging depth r
    double carrier_f0 = 3.1e6;         // [Hz]
    double envelope_bandwidth = 2.0e6; // [Hz], two-sided support of the pulse envelope spectrum
    double sample_rate_fs = 16.0e6;    // [Hz]
    std::vector<double> directions;    // [rad], strictly increasing, each in (-pi/2, pi/2)
    double dynamic_range_db = 60.0;    // [dB]
};

struct Setup {
    ArrayGeometry geometry;
    ImagingConfig imaging;
};

// Sampling grid over one acquisition window. The window duration is
// T = 2r/c and the grid holds N = floor(T*fs) samples at t_n = n/fs.
// DFT index k corresponds to frequency k/period() where
// period() = N/fs is the exact span of the sampled grid.
struct GridSpec {
    double duration = 0.0;    // T [s]
    std::size_t num_samples = 0; // N
    double sample_rate = 0.0; // fs [Hz]

    double period() const { return static_cast<double>(num_samples) / sample_rate; }
    double time(std::size_t n) const { return static_cast<double>(n) / sample_rate; }
    double dft_freq(std::size_t k) const { return static_cast<double>(k) / period(); }
};

inline void validate_geometry(const ArrayGeometry& geom) {
    if (geom.element_offsets.empty())
        throw config_error("element_offsets: array must contain at least one element");
    if (!(geom.speed_of_sound > 0.0) || !std::isfinite(geom.speed_of_sound))
        throw config_error("speed_of_sound: must be positive and finite");
    if (geom.reference_index >= geom.element_offsets.size())
        throw config_error("reference_index: out of range for " +
                           std::to_string(geom.element_offsets.size()) + " elements");
    for (double d : geom.element_offsets)
        if (!std::isfinite(d))
            throw config_error("element_offsets: all offsets must be finite");
    if (geom.element_offsets[geom.reference_index] != 0.0)
        throw config_error("element_offsets: offset at reference_index must be exactly 0");
}

inline void validate_imaging(const ImagingConfig& cfg) {
    if (!(cfg.depth_r > 0.0) || !std::isfinite(cfg.depth_r))
        throw config_error("depth_r: must be positive and finite");
    if (!(cfg.carrier_f0 > 0.0) || !std::isfinite(cfg.carrier_f0))
        throw config_error("carrier_f0: must be positive and finite");
    if (!(cfg.envelope_bandwidth > 0.0) || !std::isfinite(cfg.envelope_bandwidth))
        throw config_error("envelope_bandwidth: must be positive and finite");
    if (!(cfg.sample_rate_fs > 0.0) || !std::isfinite(cfg.sample_rate_fs))
        throw config_error("sample_rate_fs: must be positive and finite");
    if (cfg.carrier_f0 + cfg.envelope_bandwidth / 2.0 >= cfg.sample_rate_fs / 2.0)
        throw config_error("carrier_f0: passband f0 + bw/2 must lie below Nyquist fs/2");
    if (!(cfg.dynamic_range_db > 0.0))
        throw config_error("dynamic_range_db: must be positive");
    for (std::size_t i = 0; i < cfg.directions.size(); ++i) {
        double th = cfg.directions[i];
        if (!(th > -std::numbers::pi / 2.0 && th < std::numbers::pi / 2.0))
            throw config_error("directions: each direction must lie in (-pi/2, pi/2)");
        if (i > 0 && th <= cfg.directions[i - 1])
            throw config_error("directions: must be strictly increasing");
    }
}

// Derives the time grid from depth and sample rate.
inline GridSpec derive_grid(const ImagingConfig& cfg, const ArrayGeometry& geom) {
    if (!(cfg.depth_r > 0.0))
        throw config_error("depth_r: must be positive");
    if (!(geom.speed_of_sound > 0.0))
        throw config_error("speed_of_sound: must be positive");
    if (!(cfg.sample_rate_fs > 0.0))
        throw config_error("sample_rate_fs: must be positive");
    GridSpec grid;
    grid.duration = 2.0 * cfg.depth_r / geom.speed_of_sound;
    grid.num_samples = static_cast<std::size_t>(grid.duration * cfg.sample_rate_fs);
    grid.sample_rate = cfg.sample_rate_fs;
    if (grid.num_samples < 2)
        throw config_error("depth_r: window too short, derived sample count below 2");
    return grid;
}

// Uniform linear array with the reference element at index m0.
// Offsets are (i - m0) * pitch, so the reference offset is exactly zero.
inline ArrayGeometry uniform_linear_array(std::size_t num_elements, double pitch,
                                          double speed_of_sound) {
    if (num_elements == 0)
        throw config_error("num_elements: must be at least 1");
    if (!(pitch > 0.0))
        throw config_error("element_pitch: must be positive");
    ArrayGeometry geom;
    geom.speed_of_sound = speed_of_sound;
    geom.reference_index = num_elements / 2;
    geom.element_offsets.resize(num_elements);
    for (std::size_t i = 0; i < num_elements; ++i)
        geom.element_offsets[i] =
            (static_cast<double>(i) - static_cast<double>(geom.reference_index)) * pitch;
    return geom;
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Multiplier for a unit suffix. Angles report is_angle_deg so the caller
// can convert; dB and bare numbers pass through unscaled.
inline bool unit_factor(const std::string& unit, double& factor, bool& is_deg) {
    is_deg = false;
    factor = 1.0;
    if (unit.empty()) return true;
    static const std::map<std::string, double> table = {
        {"m", 1.0},       {"cm", 1e-2},   {"mm", 1e-3},  {"um", 1e-6},
        {"s", 1.0},       {"ms", 1e-3},   {"us", 1e-6},  {"ns", 1e-9},
        {"Hz", 1.0},      {"kHz", 1e3},   {"MHz", 1e6},  {"GHz", 1e9},
        {"m/s", 1.0},     {"rad", 1.0},   {"dB", 1.0},
    };
    auto it = table.find(unit);
    if (it != table.end()) {
        factor = it->second;
        return true;
    }
    if (unit == "deg") {
        is_deg = true;
        return true;
    }
    return false;
}

} // namespace detail

// Parses "3.1 MHz", "16cm", "-45 deg", "0.5" into an SI value.
inline double parse_quantity(const std::string& text) {
    std::string s = detail::trim(text);
    if (s.empty())
        throw config_error("empty value where a number was expected");
    std::size_t pos = 0;
    double value = 0.0;
    try {
        value = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw config_error("cannot parse number from '" + text + "'");
    }
    std::string unit = detail::trim(s.substr(pos));
    double factor = 1.0;
    bool is_deg = false;
    if (!detail::unit_factor(unit, factor, is_deg))
        throw config_error("unknown unit suffix '" + unit + "' in '" + text + "'");
    if (is_deg) return value * std::numbers::pi / 180.0;
    return value * factor;
}

// Parses a comma-separated list of quantities, or the form
// "span(start, stop, count)" for an inclusive linear spacing.
inline std::vector<double> parse_quantity_list(const std::string& text) {
    std::string s = detail::trim(text);
    std::vector<double> out;
    if (s.rfind("span(", 0) == 0) {
        if (s.back() != ')')
            throw config_error("span(...) value is missing its closing parenthesis");
        std::string args = s.substr(5, s.size() - 6);
        std::vector<std::string> parts;
        std::stringstream ss(args);
        std::string item;
        while (std::getline(ss, item, ',')) parts.push_back(item);
        if (parts.size() != 3)
            throw config_error("span(start, stop, count) takes exactly three arguments");
        double start = parse_quantity(parts[0]);
        double stop = parse_quantity(parts[1]);
        long count = 0;
        try {
            count = std::stol(detail::trim(parts[2]));
        } catch (const std::exception&) {
            throw config_error("span count must be an integer");
        }
        if (count < 2)
            throw config_error("span count must be at least 2");
        for (long i = 0; i < count; ++i)
            out.push_back(start + (stop - start) * static_cast<double>(i) /
                                      static_cast<double>(count - 1));
        return out;
    }
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_quantity(item));
    return out;
}

using KeyValueMap = std::map<std::string, std::string>;

// Reads a "key = value" config file. '#' starts a comment; blank lines
// are ignored; later keys override earlier ones.
inline KeyValueMap read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw io_error("cannot open config file '" + path + "'");
    KeyValueMap kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(path + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw config_error(path + ":" + std::to_string(lineno) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

// Builds and validates a Setup from parsed key/value pairs.
// Geometry comes either from num_elements + element_pitch (uniform array)
// or from an explicit element_offsets list with reference_index.
inline Setup parse_setup(const KeyValueMap& kv) {
    Setup setup;
    ImagingConfig& cfg = setup.imaging;

    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };

    double speed = 1540.0;
    if (auto* v = get("speed_of_sound")) speed = parse_quantity(*v);
    if (auto* v = get("depth_r")) cfg.depth_r = parse_quantity(*v);
    if (auto* v = get("carrier_f0")) cfg.carrier_f0 = parse_quantity(*v);
    if (auto* v = get("envelope_bandwidth")) cfg.envelope_bandwidth = parse_quantity(*v);
    if (auto* v = get("sample_rate_fs")) cfg.sample_rate_fs = parse_quantity(*v);
    if (auto* v = get("dynamic_range_db")) cfg.dynamic_range_db = parse_quantity(*v);
    if (auto* v = get("directions")) cfg.directions = parse_quantity_list(*v);

    if (auto* v = get("element_offsets")) {
        setup.geometry.element_offsets = parse_quantity_list(*v);
        setup.geometry.speed_of_sound = speed;
        if (auto* r = get("reference_index"))
            setup.geometry.reference_index = static_cast<std::size_t>(std::stoul(*r));
    } else {
        std::size_t m = 64;
        if (auto* v = get("num_elements")) {
            long parsed = std::stol(*v);
            if (parsed < 1)
                throw config_error("num_elements: must be at least 1");
            m = static_cast<std::size_t>(parsed);
        }
        // Default pitch is half a wavelength at the carrier.
        double pitch = speed / cfg.carrier_f0 / 2.0;
        if (auto* v = get("element_pitch")) pitch = parse_quantity(*v);
        setup.geometry = uniform_linear_array(m, pitch, speed);
        if (get("reference_index"))
            throw config_error(
                "reference_index: only valid together with explicit element_offsets");
    }

    static const char* known[] = {
        "speed_of_sound", "depth_r",        "carrier_f0",       "envelope_bandwidth",
        "sample_rate_fs", "dynamic_range_db", "directions",     "element_offsets",
        "reference_index", "num_elements",  "element_pitch",
    };
    for (const auto& [key, value] : kv) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) ok = true;
        if (!ok)
            throw config_error("unknown config key '" + key + "'");
    }

    validate_geometry(setup.geometry);
    validate_imaging(setup.imaging);
    return setup;
}

inline Setup load_setup(const std::string& path,
                        const std::vector<std::string>& overrides = {}) {
    KeyValueMap kv = read_config_file(path);
    for (const std::string& o : overrides) {
        std::size_t eq = o.find('=');
        if (eq == std::string::npos)
            throw config_error("override '" + o + "' must have the form key=value");
        kv[detail::trim(o.substr(0, eq))] = detail::trim(o.substr(eq + 1));
    }
    return parse_setup(kv);
}

} // namespace subeam
