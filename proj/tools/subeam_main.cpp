// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.
//
// Command line front end. Subcommands cover the full pipeline:
// simulate raw channel frames, build and inspect kernel tables,
// beamform in time or frequency, recover lines from partial
// measurements, render sector images, and run scripted experiments.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "subeam/channel_frame.hpp"
#include "subeam/config.hpp"
#include "subeam/cs.hpp"
#include "subeam/errors.hpp"
#include "subeam/experiment.hpp"
#include "subeam/freq_beamform.hpp"
#include "subeam/freq_kernel.hpp"
#include "subeam/image.hpp"
#include "subeam/phantom.hpp"
#include "subeam/pulse.hpp"
#include "subeam/simulate.hpp"
#include "subeam/time_beamform.hpp"
#include "subeam/version.hpp"

namespace {

struct CommonSetupArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_setup_options(CLI::App* cmd, CommonSetupArgs& args) {
    cmd->add_option("--config", args.config_path, "imaging setup file (key = value)")
        ->required();
    cmd->add_option("--set", args.overrides,
                    "override a config key, e.g. --set depth_r=8cm (repeatable)");
}

struct KernelArgs {
    subeam::KernelOptions options;
};

void add_kernel_options(CLI::App* cmd, KernelArgs& args) {
    cmd->add_option("--eps-q", args.options.eps_q,
                    "per-coefficient dropped-energy budget for window growth");
    cmd->add_option("--cap-neg", args.options.cap_neg,
                    "window cap toward negative offsets");
    cmd->add_option("--cap-pos", args.options.cap_pos,
                    "window cap toward positive offsets");
}

std::string numbered_name(const std::string& prefix, std::size_t index,
                          const std::string& ext) {
    std::ostringstream oss;
    oss << prefix << "_" << std::setw(3) << std::setfill('0') << index << ext;
    return oss.str();
}

// Builds or loads a kernel table for one direction, verifying that a
// loaded table matches the frame and setup it will be applied to.
subeam::QKernelTable obtain_table(const std::string& table_path, const subeam::Setup& setup,
                                  const subeam::GridSpec& grid, double theta,
                                  const subeam::IndexBand& kappa,
                                  const subeam::KernelOptions& options,
                                  const std::string& save_path) {
    subeam::QKernelTable table;
    if (!table_path.empty()) {
        const std::uint64_t hash = subeam::kernel_content_hash(
            setup.geometry, theta, grid.num_samples, grid.sample_rate, kappa, options);
        table = subeam::read_kernel_table(table_path, hash);
    } else {
        table = subeam::build_kernel_table(setup.geometry, setup.imaging, theta, kappa,
                                           options);
        if (!save_path.empty()) {
            const std::uint64_t hash = subeam::kernel_content_hash(
                setup.geometry, theta, grid.num_samples, grid.sample_rate, kappa, options);
            subeam::write_kernel_table(save_path, table, hash);
        }
    }
    return table;
}

void print_kernel_stats(std::ostream& out, const subeam::QKernelTable& table) {
    const subeam::KernelStats st = subeam::kernel_stats(table);
    out << "theta = " << table.theta << " rad\n";
    out << "kappa = " << st.kappa_size << "\n";
    out << "nu = " << st.nu_size << "\n";
    out << "nu_over_kappa = " << st.ratio << "\n";
    out << "n_samples = " << st.num_samples << "\n";
    out << "reduction = " << st.reduction << "\n";
    out << "max_dropped_energy = " << st.max_dropped << "\n";
}

std::pair<std::size_t, std::size_t> parse_size(const std::string& text) {
    std::size_t x = text.find('x');
    if (x == std::string::npos)
        throw subeam::config_error("--size expects WIDTHxHEIGHT, e.g. 512x512");
    try {
        std::size_t w = std::stoul(text.substr(0, x));
        std::size_t h = std::stoul(text.substr(x + 1));
        return {w, h};
    } catch (const std::exception&) {
        throw subeam::config_error("--size expects WIDTHxHEIGHT, e.g. 512x512");
    }
}

int run_simulate(const CommonSetupArgs& setup_args, const std::string& phantom_path,
                 bool speckle, std::uint64_t seed, double density, double amp_std,
                 bool spreading, double noise_snr, std::uint64_t noise_seed,
                 const std::string& out_dir, bool print_grid) {
    const subeam::Setup setup = subeam::load_setup(setup_args.config_path,
                                                   setup_args.overrides);
    const subeam::GridSpec grid = subeam::derive_grid(setup.imaging, setup.geometry);

    if (print_grid) {
        const subeam::PulseModel pulse = subeam::make_pulse(setup.imaging);
        const subeam::SampledPulse sampled = subeam::sample_pulse(pulse, grid);
        const subeam::IndexBand kappa = subeam::band_select(sampled.h_dft);
        std::cout << "num_elements = " << setup.geometry.num_elements() << "\n";
        std::cout << "num_samples = " << grid.num_samples << "\n";
        std::cout << "duration = " << grid.duration << " s\n";
        std::cout << "period = " << grid.period() << " s\n";
        std::cout << "sample_rate = " << grid.sample_rate << " Hz\n";
        std::cout << "band = [" << kappa.first << ", " << kappa.last() << "]\n";
        std::cout << "band_size = " << kappa.count << "\n";
        std::cout << "num_directions = " << setup.imaging.directions.size() << "\n";
        return 0;
    }

    subeam::Phantom phantom;
    if (!phantom_path.empty() && speckle)
        throw subeam::config_error("--phantom and --speckle are mutually exclusive");
    if (!phantom_path.empty())
        phantom = subeam::read_phantom_file(phantom_path, grid,
                                            setup.geometry.speed_of_sound);
    else if (speckle)
        phantom = subeam::make_speckle_phantom(seed, density, amp_std, grid,
                                               setup.geometry.speed_of_sound);
    else
        throw subeam::config_error("provide --phantom FILE or --speckle");

    if (setup.imaging.directions.empty())
        throw subeam::config_error("directions: config defines no beam directions");

    subeam::SimulateOptions options;
    options.spreading = spreading;
    options.noise_snr_db = noise_snr;
    options.noise_seed = noise_seed;

    std::filesystem::create_directories(out_dir);
    for (std::size_t d = 0; d < setup.imaging.directions.size(); ++d) {
        const subeam::ChannelFrame frame = subeam::simulate_channels(
            phantom, setup.geometry, setup.imaging, setup.imaging.directions[d], options);
        const std::string name = numbered_name("frame", d, ".snqb");
        const std::string path = (std::filesystem::path(out_dir) / name).string();
        subeam::write_channel_frame(path, frame);
        std::cout << path << "\n";
    }
    return 0;
}

int run_kernel_build(const CommonSetupArgs& setup_args, double theta,
                     const KernelArgs& kernel_args, const std::string& out_path) {
    const subeam::Setup setup = subeam::load_setup(setup_args.config_path,
                                                   setup_args.overrides);
    const subeam::GridSpec grid = subeam::derive_grid(setup.imaging, setup.geometry);
    const subeam::PulseModel pulse = subeam::make_pulse(setup.imaging);
    const subeam::SampledPulse sampled = subeam::sample_pulse(pulse, grid);
    const subeam::IndexBand kappa = subeam::band_select(sampled.h_dft);
    const subeam::QKernelTable table = subeam::build_kernel_table(
        setup.geometry, setup.imaging, theta, kappa, kernel_args.options);
    const std::uint64_t hash = subeam::kernel_content_hash(
        setup.geometry, theta, grid.num_samples, grid.sample_rate, kappa,
        kernel_args.options);
    subeam::write_kernel_table(out_path, table, hash);
    print_kernel_stats(std::cout, table);
    return 0;
}

int run_kernel_stats(const std::string& table_path) {
    const subeam::QKernelTable table = subeam::read_kernel_table(table_path);
    print_kernel_stats(std::cout, table);
    return 0;
}

int run_beamform(const CommonSetupArgs& setup_args, const std::string& input,
                 const std::string& method, const std::string& table_path,
                 const std::string& save_table, const KernelArgs& kernel_args,
                 const std::string& out_path, const std::string& budget_report) {
    const subeam::Setup setup = subeam::load_setup(setup_args.config_path,
                                                   setup_args.overrides);
    const subeam::GridSpec grid = subeam::derive_grid(setup.imaging, setup.geometry);
    const subeam::ChannelFrame frame = subeam::read_channel_frame(input);

    subeam::BeamformedLine line;
    if (method == "time") {
        line = subeam::beamform_time(frame, setup.geometry, grid);
    } else if (method == "freq") {
        const subeam::PulseModel pulse = subeam::make_pulse(setup.imaging);
        const subeam::SampledPulse sampled = subeam::sample_pulse(pulse, grid);
        const subeam::IndexBand kappa = subeam::band_select(sampled.h_dft);
        const subeam::QKernelTable table =
            obtain_table(table_path, setup, grid, frame.theta, kappa, kernel_args.options,
                         save_table);
        const subeam::ChannelSpectra spectra =
            subeam::channel_dft(frame, table.nu_union());
        const subeam::BeamSpectrum spec = subeam::beamform_freq(spectra, table);
        line = subeam::synthesize_line(spec);
        if (!budget_report.empty()) {
            std::ofstream csv(budget_report, std::ios::binary);
            if (!csv)
                throw subeam::io_error("cannot open '" + budget_report + "' for writing");
            csv << subeam::budget_csv_header << "\n" << subeam::budget_csv_row(table) << "\n";
        }
    } else {
        throw subeam::config_error("--method must be 'time' or 'freq'");
    }
    subeam::write_channel_frame(out_path, line);
    std::cout << out_path << "\n";
    return 0;
}

int run_recover(const CommonSetupArgs& setup_args, const std::string& input,
                const std::string& method, const std::string& mu_strategy,
                std::size_t mu_count, std::size_t omp_order, double l1_eps,
                const std::string& table_path, const std::string& save_table,
                const KernelArgs& kernel_args, const std::string& out_path,
                const std::string& report_path) {
    const subeam::Setup setup = subeam::load_setup(setup_args.config_path,
                                                   setup_args.overrides);
    const subeam::GridSpec grid = subeam::derive_grid(setup.imaging, setup.geometry);
    const subeam::ChannelFrame frame = subeam::read_channel_frame(input);
    const subeam::PulseModel pulse = subeam::make_pulse(setup.imaging);
    const subeam::SampledPulse sampled = subeam::sample_pulse(pulse, grid);
    const subeam::IndexBand kappa = subeam::band_select(sampled.h_dft);
    const subeam::QKernelTable table = obtain_table(table_path, setup, grid, frame.theta,
                                                    kappa, kernel_args.options, save_table);

    const std::vector<std::size_t> mu =
        subeam::choose_mu(kappa, mu_count, mu_strategy, sampled.h_dft);
    const std::vector<std::size_t> nu_mu = table.nu_union_of(mu);
    const subeam::ChannelSpectra spectra = subeam::channel_dft(frame, nu_mu);
    const subeam::BeamSpectrum spec_mu = subeam::beamform_freq(spectra, table, mu);
    const subeam::PartialMeasurement meas =
        subeam::build_measurement(spec_mu, sampled.h_dft, mu);

    subeam::BeamformedLine line;
    nlohmann::ordered_json report;
    report["method"] = method;
    report["mu"] = mu.size();
    report["nu_mu"] = nu_mu.size();
    if (method == "omp") {
        const subeam::SparseSolution sol = subeam::recover_omp(meas, omp_order);
        line = subeam::line_from_sparse(sol, sampled.h);
        report["iterations"] = sol.iterations;
        report["residual"] = sol.residual_norm;
        report["support"] = sol.support;
        report["rank_deficiency_flagged"] = sol.flagged_rank_deficient;
    } else if (method == "l1") {
        const subeam::AnalysisSolution sol =
            subeam::recover_analysis_l1(meas, kappa, l1_eps);
        line = subeam::synthesize_line(subeam::spectrum_from_analysis(sol, sampled.h_dft));
        report["iterations"] = sol.iterations;
        report["residual"] = sol.constraint_residual;
        report["objective"] = sol.objective;
        report["feasible"] = sol.feasible;
    } else {
        throw subeam::config_error("--method must be 'omp' or 'l1'");
    }

    // The raw frame is in hand, so the time-domain oracle is available
    // for an envelope NRMSE.
    const subeam::BeamformedLine oracle = subeam::beamform_time(frame, setup.geometry, grid);
    const std::vector<double> env_test(
        subeam::envelope({line.row(0), line.row(0) + grid.num_samples}));
    const std::vector<double> env_ref(
        subeam::envelope({oracle.row(0), oracle.row(0) + grid.num_samples}));
    report["nrmse_envelope_vs_time"] = subeam::nrmse(env_test, env_ref);

    if (!out_path.empty()) subeam::write_channel_frame(out_path, line);
    std::cout << report.dump() << "\n";
    if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::binary);
        if (!out)
            throw subeam::io_error("cannot open '" + report_path + "' for writing");
        out << report.dump(2) << "\n";
    }
    return 0;
}

int run_render(const std::vector<std::string>& inputs, double dynamic_range,
               const std::string& size_text, const std::string& out_path) {
    if (inputs.size() < 2)
        throw subeam::config_error("render needs at least two line files");
    const auto [width, height] = parse_size(size_text);

    struct Entry {
        double theta;
        std::vector<double> env;
    };
    std::vector<Entry> entries;
    std::size_t n_samples = 0;
    for (const auto& path : inputs) {
        const subeam::ChannelFrame line = subeam::read_channel_frame(path);
        if (line.num_elements != 1)
            throw subeam::config_error("'" + path +
                                       "' holds a multi-element frame, not a beamformed line");
        if (n_samples == 0)
            n_samples = line.num_samples;
        else if (line.num_samples != n_samples)
            throw subeam::config_error("line files disagree on sample count");
        entries.push_back(
            {line.theta,
             subeam::envelope({line.row(0), line.row(0) + line.num_samples})});
    }
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.theta < b.theta; });

    std::vector<double> directions;
    std::vector<std::vector<std::uint8_t>> polar;
    for (const auto& e : entries) {
        directions.push_back(e.theta);
        polar.push_back(subeam::log_compress(e.env, dynamic_range));
    }
    const subeam::GrayImage img = subeam::scan_convert(polar, directions, width, height);
    subeam::write_pgm(out_path, img);
    std::cout << out_path << "\n";
    return 0;
}

int run_experiment_cmd(const std::string& spec_path, std::size_t threads) {
    const subeam::ExperimentSpec spec = subeam::read_experiment_spec(spec_path);
    const subeam::ExperimentReport result = subeam::run_experiment(spec, threads);
    std::cout << "report: "
              << (std::filesystem::path(spec.output_dir) / "report.json").string() << "\n";
    if (result.report.contains("budgets")) {
        const auto& b = result.report.at("budgets");
        std::cout << "budgets:";
        for (const auto& [key, value] : b.items()) std::cout << " " << key << "=" << value;
        std::cout << "\n";
    }
    if (result.report.contains("methods")) {
        for (const auto& [name, node] : result.report.at("methods").items())
            if (node.contains("nrmse_mean"))
                std::cout << name << " nrmse_mean=" << node.at("nrmse_mean")
                          << " nrmse_max=" << node.at("nrmse_max") << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"frequency-domain ultrasound beamforming at reduced sample budgets"};
    app.set_version_flag("--version", std::string("subeam ") + subeam::version_string);
    app.require_subcommand(1);
    app.fallthrough();

    std::size_t threads = 1;
    app.add_option("--threads", threads, "worker threads for per-direction fan-out");

    // simulate
    auto* sim = app.add_subcommand("simulate", "synthesize raw channel frames");
    CommonSetupArgs sim_setup;
    add_setup_options(sim, sim_setup);
    std::string sim_phantom;
    bool sim_speckle = false;
    std::uint64_t sim_seed = 42;
    double sim_density = 5.0;
    double sim_amp_std = 0.05;
    bool sim_spreading = false;
    double sim_noise_snr = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t sim_noise_seed = 0;
    std::string sim_out = ".";
    bool sim_print_grid = false;
    sim->add_option("--phantom", sim_phantom, "scatterer phantom file");
    sim->add_flag("--speckle", sim_speckle, "synthesize a speckle phantom instead");
    sim->add_option("--seed", sim_seed, "speckle seed");
    sim->add_option("--density", sim_density, "speckle density per mm of depth");
    sim->add_option("--amp-std", sim_amp_std, "speckle amplitude standard deviation");
    sim->add_flag("--spreading", sim_spreading, "apply 1/d amplitude spreading");
    sim->add_option("--noise-snr", sim_noise_snr, "additive white Gaussian noise SNR [dB]");
    sim->add_option("--noise-seed", sim_noise_seed, "noise seed");
    sim->add_option("-o,--output", sim_out, "output directory for frame files");
    sim->add_flag("--print-grid", sim_print_grid,
                  "print the derived grid and band, then exit");

    // kernel build / stats
    auto* kernel = app.add_subcommand("kernel", "build or inspect kernel tables");
    kernel->require_subcommand(1);
    auto* kbuild = kernel->add_subcommand("build", "build a kernel table for one direction");
    CommonSetupArgs kbuild_setup;
    add_setup_options(kbuild, kbuild_setup);
    double kbuild_theta = 0.0;
    KernelArgs kbuild_kernel;
    std::string kbuild_out;
    kbuild->add_option("--theta", kbuild_theta, "beam direction [rad]")->required();
    add_kernel_options(kbuild, kbuild_kernel);
    kbuild->add_option("-o,--output", kbuild_out, "output table path (.snqk)")->required();
    auto* kstats = kernel->add_subcommand("stats", "print sample budgets of a table");
    std::string kstats_table;
    kstats->add_option("--table", kstats_table, "kernel table path")->required();

    // beamform
    auto* bf = app.add_subcommand("beamform", "beamform one channel frame");
    CommonSetupArgs bf_setup;
    add_setup_options(bf, bf_setup);
    std::string bf_input;
    std::string bf_method = "time";
    std::string bf_table;
    std::string bf_save_table;
    KernelArgs bf_kernel;
    std::string bf_out;
    std::string bf_budget;
    bf->add_option("--input", bf_input, "channel frame file (.snqb)")->required();
    bf->add_option("--method", bf_method, "beamformer: time or freq");
    bf->add_option("--table", bf_table, "kernel table to reuse (freq only)");
    bf->add_option("--save-table", bf_save_table, "write the built table here (freq only)");
    add_kernel_options(bf, bf_kernel);
    bf->add_option("-o,--output", bf_out, "output line file (.snqb)")->required();
    bf->add_option("--budget-report", bf_budget, "write the budget CSV here (freq only)");

    // recover
    auto* rec = app.add_subcommand("recover", "recover a line from a partial measurement");
    CommonSetupArgs rec_setup;
    add_setup_options(rec, rec_setup);
    std::string rec_input;
    std::string rec_method;
    std::string rec_mu = "central";
    std::size_t rec_m = 100;
    std::size_t rec_l = 25;
    double rec_eps = 0.0;
    std::string rec_table;
    std::string rec_save_table;
    KernelArgs rec_kernel;
    std::string rec_out;
    std::string rec_report;
    rec->add_option("--input", rec_input, "channel frame file (.snqb)")->required();
    rec->add_option("--method", rec_method, "recovery method: omp or l1")->required();
    rec->add_option("--mu", rec_mu, "measured-bin strategy: central or uniform");
    rec->add_option("--m", rec_m, "number of measured coefficients");
    rec->add_option("--L", rec_l, "sparsity order for omp");
    rec->add_option("--eps", rec_eps, "constraint radius for l1");
    rec->add_option("--table", rec_table, "kernel table to reuse");
    rec->add_option("--save-table", rec_save_table, "write the built table here");
    add_kernel_options(rec, rec_kernel);
    rec->add_option("-o,--output", rec_out, "output line file (.snqb)");
    rec->add_option("--report", rec_report, "also write the JSON report here");

    // render
    auto* ren = app.add_subcommand("render", "render beamformed lines to a sector image");
    std::vector<std::string> ren_inputs;
    double ren_dr = 60.0;
    std::string ren_size = "512x512";
    std::string ren_out;
    ren->add_option("--input", ren_inputs, "beamformed line files (.snqb)")
        ->required()
        ->expected(-1);
    ren->add_option("--dr", ren_dr, "dynamic range [dB]");
    ren->add_option("--size", ren_size, "output size as WIDTHxHEIGHT");
    ren->add_option("-o,--output", ren_out, "output image (.pgm)")->required();

    // experiment
    auto* exp = app.add_subcommand("experiment", "run a scripted experiment");
    std::string exp_spec;
    exp->add_option("--spec", exp_spec, "experiment spec (JSON)")->required();

    try {
        app.parse(argc, argv);
        if (sim->parsed())
            return run_simulate(sim_setup, sim_phantom, sim_speckle, sim_seed, sim_density,
                                sim_amp_std, sim_spreading, sim_noise_snr, sim_noise_seed,
                                sim_out, sim_print_grid);
        if (kernel->parsed()) {
            if (kbuild->parsed())
                return run_kernel_build(kbuild_setup, kbuild_theta, kbuild_kernel, kbuild_out);
            return run_kernel_stats(kstats_table);
        }
        if (bf->parsed())
            return run_beamform(bf_setup, bf_input, bf_method, bf_table, bf_save_table,
                                bf_kernel, bf_out, bf_budget);
        if (rec->parsed())
            return run_recover(rec_setup, rec_input, rec_method, rec_mu, rec_m, rec_l,
                               rec_eps, rec_table, rec_save_table, rec_kernel, rec_out,
                               rec_report);
        if (ren->parsed())
            return run_render(ren_inputs, ren_dr, ren_size, ren_out);
        if (exp->parsed())
            return run_experiment_cmd(exp_spec, threads);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const subeam::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
