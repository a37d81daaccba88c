// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.
//
// Raw channel data for one direction: an M x N matrix of samples
// phi_m[n], plus the direction and sample rate. Stored on disk as a
// little-endian binary frame ("SNQB") with f32 samples for compact,
// bit-exact regression data. A beamformed line reuses the same format
// with M = 1.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "subeam/errors.hpp"

namespace subeam {

enum class FrameSource { simulated, file };

struct ChannelFrame {
    std::size_t num_elements = 0; // M
    std::size_t num_samples = 0;  // N
    double theta = 0.0;           // [rad]
    double sample_rate = 0.0;     // [Hz]
    FrameSource source = FrameSource::simulated;
    std::vector<double> samples;  // row-major M x N

    double& at(std::size_t m, std::size_t n) { return samples[m * num_samples + n]; }
    double at(std::size_t m, std::size_t n) const { return samples[m * num_samples + n]; }

    const double* row(std::size_t m) const { return samples.data() + m * num_samples; }
    double* row(std::size_t m) { return samples.data() + m * num_samples; }
};

inline ChannelFrame make_frame(std::size_t num_elements, std::size_t num_samples,
                               double theta, double sample_rate) {
    ChannelFrame f;
    f.num_elements = num_elements;
    f.num_samples = num_samples;
    f.theta = theta;
    f.sample_rate = sample_rate;
    f.samples.assign(num_elements * num_samples, 0.0);
    return f;
}

// A beamformed line is a single-row frame.
using BeamformedLine = ChannelFrame;

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "frame I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in)
        throw io_error("truncated frame file '" + path + "'");
    return value;
}

} // namespace detail

inline constexpr char frame_magic[4] = {'S', 'N', 'Q', 'B'};
inline constexpr std::uint16_t frame_format_version = 1;

inline void write_channel_frame(const std::string& path, const ChannelFrame& frame) {
    if (frame.samples.size() != frame.num_elements * frame.num_samples)
        throw structural_error("frame sample buffer does not match its dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw io_error("cannot open '" + path + "' for writing");
    out.write(frame_magic, 4);
    detail::write_pod(out, frame_format_version);
    detail::write_pod(out, static_cast<std::uint32_t>(frame.num_elements));
    detail::write_pod(out, static_cast<std::uint32_t>(frame.num_samples));
    detail::write_pod(out, frame.theta);
    detail::write_pod(out, frame.sample_rate);
    std::vector<float> f32(frame.samples.size());
    for (std::size_t i = 0; i < f32.size(); ++i)
        f32[i] = static_cast<float>(frame.samples[i]);
    out.write(reinterpret_cast<const char*>(f32.data()),
              static_cast<std::streamsize>(f32.size() * sizeof(float)));
    if (!out)
        throw io_error("failed writing frame file '" + path + "'");
}

inline ChannelFrame read_channel_frame(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error("cannot open frame file '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, frame_magic, 4) != 0)
        throw io_error("'" + path + "' is not a channel frame file (bad magic)");
    auto version = detail::read_pod<std::uint16_t>(in, path);
    if (version != frame_format_version)
        throw io_error("'" + path + "' has unsupported frame format version " +
                       std::to_string(version));
    auto m = detail::read_pod<std::uint32_t>(in, path);
    auto n = detail::read_pod<std::uint32_t>(in, path);
    auto theta = detail::read_pod<double>(in, path);
    auto fs = detail::read_pod<double>(in, path);
    ChannelFrame frame = make_frame(m, n, theta, fs);
    frame.source = FrameSource::file;
    std::vector<float> f32(frame.samples.size());
    in.read(reinterpret_cast<char*>(f32.data()),
            static_cast<std::streamsize>(f32.size() * sizeof(float)));
    if (!in)
        throw io_error("truncated frame file '" + path + "'");
    for (std::size_t i = 0; i < f32.size(); ++i)
        frame.samples[i] = static_cast<double>(f32[i]);
    return frame;
}

} // namespace subeam
