// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.
//
// Experiment orchestration: one JSON spec drives simulation, the
// requested beamforming and recovery methods, metric computation, and
// artifact output. Reruns with the same spec produce byte-identical
// reports and images, so none of the outputs may carry timestamps or
// wall-clock readings.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "subeam/channel_frame.hpp"
#include "subeam/config.hpp"
#include "subeam/cs.hpp"
#include "subeam/errors.hpp"
#include "subeam/freq_beamform.hpp"
#include "subeam/freq_kernel.hpp"
#include "subeam/image.hpp"
#include "subeam/phantom.hpp"
#include "subeam/pulse.hpp"
#include "subeam/simulate.hpp"
#include "subeam/time_beamform.hpp"
#include "subeam/version.hpp"

namespace subeam {

struct SpeckleSettings {
    std::uint64_t seed = 42;
    double density_per_mm = 5.0;
    double amp_std = 0.05;
};

struct RecoverySettings {
    std::size_t mu_count = 100;
    std::string mu_strategy = "central";
    std::size_t omp_order = 25;
    double l1_eps = 0.0;
};

struct RenderSettings {
    std::size_t width = 512;
    std::size_t height = 512;
};

struct ExperimentSpec {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string phantom_path; // empty means synthesize speckle instead
    bool use_speckle = false;
    SpeckleSettings speckle;
    std::vector<std::string> methods; // subset of {time, freq, omp, l1}
    std::vector<std::string> metrics; // subset of {nrmse, budgets}; empty means all
    std::string output_dir;
    KernelOptions kernel_options;
    RecoverySettings recovery;
    RenderSettings render;
};

inline void validate_experiment_spec(const ExperimentSpec& spec) {
    if (spec.config_path.empty())
        throw config_error("experiment spec: 'config' is required");
    if (spec.output_dir.empty())
        throw config_error("experiment spec: 'output_dir' is required");
    if (spec.methods.empty())
        throw config_error("experiment spec: method chain must not be empty");
    static const std::vector<std::string> known_methods{"time", "freq", "omp", "l1"};
    for (const auto& m : spec.methods) {
        if (std::find(known_methods.begin(), known_methods.end(), m) == known_methods.end())
            throw config_error("experiment spec: unknown method '" + m + "'");
        if (std::count(spec.methods.begin(), spec.methods.end(), m) > 1)
            throw config_error("experiment spec: method '" + m + "' listed twice");
    }
    static const std::vector<std::string> known_metrics{"nrmse", "budgets"};
    for (const auto& m : spec.metrics)
        if (std::find(known_metrics.begin(), known_metrics.end(), m) == known_metrics.end())
            throw config_error("experiment spec: unknown metric '" + m + "'");
    if (spec.phantom_path.empty() && !spec.use_speckle)
        throw config_error("experiment spec: provide 'phantom' or 'speckle'");
    if (!spec.phantom_path.empty() && spec.use_speckle)
        throw config_error("experiment spec: 'phantom' and 'speckle' are mutually exclusive");
    if (spec.recovery.mu_strategy != "central" && spec.recovery.mu_strategy != "uniform")
        throw config_error("experiment spec: mu_strategy must be 'central' or 'uniform'");
    validate_kernel_options(spec.kernel_options);
}

namespace detail {

// Relative paths inside a spec file are taken relative to the file's
// own directory, so a spec bundle can be moved as a unit.
inline std::string resolve_against(const std::string& base_dir, const std::string& path) {
    if (path.empty()) return path;
    std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (std::filesystem::path(base_dir) / p).string();
}

} // namespace detail

inline ExperimentSpec read_experiment_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw io_error("cannot open experiment spec '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("experiment spec '" + path + "': " + e.what());
    }
    if (!doc.is_object())
        throw config_error("experiment spec '" + path + "': top level must be an object");

    const std::string base_dir = std::filesystem::path(path).parent_path().string();
    ExperimentSpec spec;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "config") {
                spec.config_path = detail::resolve_against(base_dir, value.get<std::string>());
            } else if (key == "overrides") {
                spec.overrides = value.get<std::vector<std::string>>();
            } else if (key == "phantom") {
                spec.phantom_path = detail::resolve_against(base_dir, value.get<std::string>());
            } else if (key == "speckle") {
                spec.use_speckle = true;
                if (value.contains("seed"))
                    spec.speckle.seed = value.at("seed").get<std::uint64_t>();
                if (value.contains("density_per_mm"))
                    spec.speckle.density_per_mm = value.at("density_per_mm").get<double>();
                if (value.contains("amp_std"))
                    spec.speckle.amp_std = value.at("amp_std").get<double>();
            } else if (key == "methods") {
                spec.methods = value.get<std::vector<std::string>>();
            } else if (key == "metrics") {
                spec.metrics = value.get<std::vector<std::string>>();
            } else if (key == "output_dir") {
                // Outputs land relative to the invocation, not the spec file.
                spec.output_dir = value.get<std::string>();
            } else if (key == "recovery") {
                if (value.contains("mu"))
                    spec.recovery.mu_count = value.at("mu").get<std::size_t>();
                if (value.contains("mu_strategy"))
                    spec.recovery.mu_strategy = value.at("mu_strategy").get<std::string>();
                if (value.contains("omp_order"))
                    spec.recovery.omp_order = value.at("omp_order").get<std::size_t>();
                if (value.contains("l1_eps"))
                    spec.recovery.l1_eps = value.at("l1_eps").get<double>();
            } else if (key == "kernel") {
                if (value.contains("eps_q"))
                    spec.kernel_options.eps_q = value.at("eps_q").get<double>();
                if (value.contains("cap_neg"))
                    spec.kernel_options.cap_neg = value.at("cap_neg").get<std::int32_t>();
                if (value.contains("cap_pos"))
                    spec.kernel_options.cap_pos = value.at("cap_pos").get<std::int32_t>();
            } else if (key == "render") {
                if (value.contains("width"))
                    spec.render.width = value.at("width").get<std::size_t>();
                if (value.contains("height"))
                    spec.render.height = value.at("height").get<std::size_t>();
            } else {
                throw config_error("experiment spec '" + path + "': unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw config_error("experiment spec '" + path + "': " + e.what());
    }
    validate_experiment_spec(spec);
    return spec;
}

struct ExperimentReport {
    nlohmann::ordered_json report;
    std::vector<std::string> artifacts; // paths relative to the output directory
};

namespace detail {

// Per-direction results computed by the worker pool. Workers only
// fill these slots; all file output happens on the calling thread.
struct DirectionResult {
    std::map<std::string, std::vector<double>> lines;     // method -> time line
    std::map<std::string, std::vector<double>> envelopes; // method -> envelope
    std::map<std::string, double> line_nrmse;             // method -> envelope NRMSE vs time
    std::string budget_row;
    std::size_t nu_size = 0;
    std::size_t nu_mu_size = 0;
    double nu_ratio = 0.0;
    std::size_t omp_iterations = 0;
    double omp_residual = 0.0;
    bool omp_rank_flag = false;
    std::size_t l1_iterations = 0;
    bool l1_feasible = true;
    double l1_objective = 0.0;
};

inline void write_manifest(const std::string& dir, const std::vector<std::string>& artifacts,
                           const std::string& failed_stage, const std::string& cause) {
    std::ofstream out(std::filesystem::path(dir) / "MANIFEST", std::ios::binary);
    if (!out) return;
    if (failed_stage.empty()) {
        out << "status: complete\n";
    } else {
        out << "status: incomplete\n";
        out << "stage: " << failed_stage << "\n";
        out << "cause: " << cause << "\n";
    }
    for (const auto& a : artifacts) out << "artifact: " << a << "\n";
}

} // namespace detail

// Runs the full experiment described by the spec and writes report,
// MANIFEST, and artifacts into the output directory. Returns the
// report for callers that want it in memory. `threads` bounds the
// fan-out across directions; results do not depend on it.
inline ExperimentReport run_experiment(const ExperimentSpec& spec, std::size_t threads = 1) {
    validate_experiment_spec(spec);

    auto wants_method = [&](const char* name) {
        return std::find(spec.methods.begin(), spec.methods.end(), name) != spec.methods.end();
    };
    auto wants_metric = [&](const char* name) {
        return spec.metrics.empty() ||
               std::find(spec.metrics.begin(), spec.metrics.end(), name) != spec.metrics.end();
    };
    const bool needs_table = wants_method("freq") || wants_method("omp") || wants_method("l1");
    const bool needs_cs = wants_method("omp") || wants_method("l1");

    std::vector<std::string> artifacts;
    std::string stage = "setup";
    try {
        const Setup setup = load_setup(spec.config_path, spec.overrides);
        const GridSpec grid = derive_grid(setup.imaging, setup.geometry);
        const PulseModel pulse = make_pulse(setup.imaging);
        const SampledPulse sampled = sample_pulse(pulse, grid);
        const IndexBand kappa = band_select(sampled.h_dft);
        const std::size_t n_dirs = setup.imaging.directions.size();

        stage = "phantom";
        Phantom phantom;
        if (spec.use_speckle)
            phantom = make_speckle_phantom(spec.speckle.seed, spec.speckle.density_per_mm,
                                           spec.speckle.amp_std, grid,
                                           setup.geometry.speed_of_sound);
        else
            phantom = read_phantom_file(spec.phantom_path, grid,
                                        setup.geometry.speed_of_sound);

        stage = "output directory";
        std::filesystem::create_directories(spec.output_dir);
        std::filesystem::path out_root(spec.output_dir);
        if (needs_table)
            std::filesystem::create_directories(out_root / "kernels");

        std::vector<std::size_t> mu;
        if (needs_cs)
            mu = choose_mu(kappa, spec.recovery.mu_count, spec.recovery.mu_strategy,
                           sampled.h_dft);

        stage = "beamforming";
        std::vector<detail::DirectionResult> results(n_dirs);
        std::atomic<std::size_t> next{0};
        std::mutex failure_mutex;
        std::exception_ptr failure;

        auto process_direction = [&](std::size_t d) {
            const double theta = setup.imaging.directions[d];
            detail::DirectionResult& res = results[d];

            ChannelFrame frame =
                simulate_channels(phantom, setup.geometry, setup.imaging, theta);
            BeamformedLine time_line = beamform_time(frame, setup.geometry, grid);
            std::vector<double> time_vec(time_line.row(0), time_line.row(0) + grid.num_samples);
            res.lines["time"] = time_vec;
            res.envelopes["time"] = envelope(time_vec);

            if (!needs_table) return;

            std::ostringstream kernel_name;
            kernel_name << "kernel_" << std::setw(3) << std::setfill('0') << d << ".snqk";
            QKernelTable table = load_or_build_kernel_table(
                (out_root / "kernels" / kernel_name.str()).string(), setup.geometry,
                setup.imaging, theta, kappa, spec.kernel_options);
            const KernelStats stats = kernel_stats(table);
            res.budget_row = budget_csv_row(table);
            res.nu_size = stats.nu_size;
            res.nu_ratio = stats.ratio;

            if (wants_method("freq")) {
                ChannelSpectra spectra = channel_dft(frame, table.nu_union());
                BeamSpectrum spec_full = beamform_freq(spectra, table);
                BeamformedLine freq_line = synthesize_line(spec_full);
                std::vector<double> v(freq_line.row(0), freq_line.row(0) + grid.num_samples);
                res.lines["freq"] = v;
                res.envelopes["freq"] = envelope(v);
                res.line_nrmse["freq"] = nrmse(res.envelopes["freq"], res.envelopes["time"]);
            }

            if (needs_cs) {
                const std::vector<std::size_t> nu_mu = table.nu_union_of(mu);
                res.nu_mu_size = nu_mu.size();
                ChannelSpectra spectra_mu = channel_dft(frame, nu_mu);
                BeamSpectrum spec_mu = beamform_freq(spectra_mu, table, mu);
                PartialMeasurement meas = build_measurement(spec_mu, sampled.h_dft, mu);

                if (wants_method("omp")) {
                    SparseSolution sol = recover_omp(meas, spec.recovery.omp_order);
                    res.omp_iterations = sol.iterations;
                    res.omp_residual = sol.residual_norm;
                    res.omp_rank_flag = sol.flagged_rank_deficient;
                    BeamformedLine line = line_from_sparse(sol, sampled.h);
                    std::vector<double> v(line.row(0), line.row(0) + grid.num_samples);
                    res.lines["omp"] = v;
                    res.envelopes["omp"] = envelope(v);
                    res.line_nrmse["omp"] = nrmse(res.envelopes["omp"], res.envelopes["time"]);
                }
                if (wants_method("l1")) {
                    AnalysisSolution sol =
                        recover_analysis_l1(meas, kappa, spec.recovery.l1_eps);
                    res.l1_iterations = sol.iterations;
                    res.l1_feasible = sol.feasible;
                    res.l1_objective = sol.objective;
                    BeamSpectrum spec_l1 = spectrum_from_analysis(sol, sampled.h_dft);
                    BeamformedLine line = synthesize_line(spec_l1);
                    std::vector<double> v(line.row(0), line.row(0) + grid.num_samples);
                    res.lines["l1"] = v;
                    res.envelopes["l1"] = envelope(v);
                    res.line_nrmse["l1"] = nrmse(res.envelopes["l1"], res.envelopes["time"]);
                }
            }
        };

        std::atomic<bool> failed{false};
        auto worker = [&]() {
            for (;;) {
                const std::size_t d = next.fetch_add(1);
                if (d >= n_dirs || failed.load()) return;
                try {
                    process_direction(d);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        };
        const std::size_t pool =
            std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n_dirs, 1));
        if (pool <= 1) {
            worker();
        } else {
            std::vector<std::thread> workers;
            workers.reserve(pool);
            for (std::size_t t = 0; t < pool; ++t) workers.emplace_back(worker);
            for (auto& w : workers) w.join();
        }
        if (failure) std::rethrow_exception(failure);
        if (needs_table)
            for (std::size_t d = 0; d < n_dirs; ++d) {
                std::ostringstream kernel_name;
                kernel_name << "kernels/kernel_" << std::setw(3) << std::setfill('0') << d
                            << ".snqk";
                artifacts.push_back(kernel_name.str());
            }

        stage = "artifacts";
        std::filesystem::create_directories(out_root / "lines");
        for (const auto& method : spec.methods) {
            for (std::size_t d = 0; d < n_dirs; ++d) {
                BeamformedLine line = make_frame(1, grid.num_samples,
                                                 setup.imaging.directions[d],
                                                 setup.imaging.sample_rate_fs);
                const std::vector<double>& v = results[d].lines.at(method);
                std::copy(v.begin(), v.end(), line.row(0));
                std::ostringstream name;
                name << "lines/" << method << "_" << std::setw(3) << std::setfill('0') << d
                     << ".snqb";
                write_channel_frame((out_root / name.str()).string(), line);
                artifacts.push_back(name.str());
            }
        }

        stage = "render";
        if (n_dirs >= 2 && spec.render.width >= 2 && spec.render.height >= 2) {
            for (const auto& method : spec.methods) {
                std::vector<std::vector<std::uint8_t>> polar(n_dirs);
                for (std::size_t d = 0; d < n_dirs; ++d)
                    polar[d] = log_compress(results[d].envelopes.at(method),
                                            setup.imaging.dynamic_range_db);
                GrayImage img = scan_convert(polar, setup.imaging.directions,
                                             spec.render.width, spec.render.height);
                const std::string name = "image_" + method + ".pgm";
                write_pgm((out_root / name).string(), img);
                artifacts.push_back(name);
            }
        }

        stage = "budget csv";
        if (needs_table && wants_metric("budgets")) {
            std::ofstream csv(out_root / "budgets.csv", std::ios::binary);
            if (!csv)
                throw io_error("cannot open budget CSV for writing");
            csv << budget_csv_header << "\n";
            for (std::size_t d = 0; d < n_dirs; ++d) csv << results[d].budget_row << "\n";
            artifacts.push_back("budgets.csv");
        }

        stage = "report";
        ExperimentReport out;
        nlohmann::ordered_json& rep = out.report;
        rep["schema_version"] = report_schema_version;
        rep["spec"]["config"] = spec.config_path;
        if (spec.use_speckle) {
            rep["spec"]["speckle"]["seed"] = spec.speckle.seed;
            rep["spec"]["speckle"]["density_per_mm"] = spec.speckle.density_per_mm;
            rep["spec"]["speckle"]["amp_std"] = spec.speckle.amp_std;
        } else {
            rep["spec"]["phantom"] = spec.phantom_path;
        }
        rep["spec"]["methods"] = spec.methods;
        rep["setup"]["num_elements"] = setup.geometry.num_elements();
        rep["setup"]["speed_of_sound"] = setup.geometry.speed_of_sound;
        rep["setup"]["depth_r"] = setup.imaging.depth_r;
        rep["setup"]["carrier_f0"] = setup.imaging.carrier_f0;
        rep["setup"]["envelope_bandwidth"] = setup.imaging.envelope_bandwidth;
        rep["setup"]["sample_rate_fs"] = setup.imaging.sample_rate_fs;
        rep["setup"]["num_samples"] = grid.num_samples;
        rep["setup"]["num_directions"] = n_dirs;
        rep["band"]["first"] = kappa.first;
        rep["band"]["last"] = kappa.last();
        rep["band"]["count"] = kappa.count;

        if (wants_metric("budgets")) {
            rep["budgets"]["n"] = grid.num_samples;
            rep["budgets"]["kappa"] = kappa.count;
            if (needs_table) {
                std::size_t nu_max = 0;
                double ratio_max = 0.0;
                for (const auto& r : results) {
                    nu_max = std::max(nu_max, r.nu_size);
                    ratio_max = std::max(ratio_max, r.nu_ratio);
                }
                rep["budgets"]["nu_max"] = nu_max;
                rep["budgets"]["nu_over_kappa_max"] = ratio_max;
                rep["budgets"]["reduction_n_over_nu"] =
                    static_cast<double>(grid.num_samples) / static_cast<double>(nu_max);
            }
            if (needs_cs) {
                std::size_t nu_mu_max = 0;
                for (const auto& r : results) nu_mu_max = std::max(nu_mu_max, r.nu_mu_size);
                rep["budgets"]["mu"] = mu.size();
                rep["budgets"]["nu_mu_max"] = nu_mu_max;
                rep["budgets"]["reduction_n_over_nu_mu"] =
                    static_cast<double>(grid.num_samples) / static_cast<double>(nu_mu_max);
            }
        }

        if (wants_metric("nrmse")) {
            for (const auto& method : spec.methods) {
                if (method == "time") continue;
                std::vector<double> per_dir(n_dirs);
                double sum = 0.0;
                double worst = 0.0;
                for (std::size_t d = 0; d < n_dirs; ++d) {
                    per_dir[d] = results[d].line_nrmse.at(method);
                    sum += per_dir[d];
                    worst = std::max(worst, per_dir[d]);
                }
                auto& node = rep["methods"][method];
                node["nrmse_mean"] = sum / static_cast<double>(n_dirs);
                node["nrmse_max"] = worst;
                node["nrmse_per_direction"] = per_dir;
            }
        }
        if (wants_method("omp")) {
            std::size_t iters = 0;
            bool flagged = false;
            for (const auto& r : results) {
                iters += r.omp_iterations;
                flagged = flagged || r.omp_rank_flag;
            }
            rep["methods"]["omp"]["total_iterations"] = iters;
            rep["methods"]["omp"]["rank_deficiency_flagged"] = flagged;
        }
        if (wants_method("l1")) {
            std::size_t iters = 0;
            std::size_t feasible = 0;
            for (const auto& r : results) {
                iters += r.l1_iterations;
                feasible += r.l1_feasible ? 1 : 0;
            }
            rep["methods"]["l1"]["total_iterations"] = iters;
            rep["methods"]["l1"]["feasible_directions"] = feasible;
        }

        rep["artifacts"] = artifacts;

        std::ofstream rj(out_root / "report.json", std::ios::binary);
        if (!rj)
            throw io_error("cannot open report.json for writing");
        rj << rep.dump(2) << "\n";
        artifacts.insert(artifacts.begin(), "report.json");
        rep["artifacts"] = artifacts;

        detail::write_manifest(spec.output_dir, artifacts, "", "");
        out.artifacts = artifacts;
        return out;
    } catch (const std::exception& e) {
        if (std::filesystem::exists(spec.output_dir))
            detail::write_manifest(spec.output_dir, artifacts, stage, e.what());
        throw;
    }
}

} // namespace subeam
