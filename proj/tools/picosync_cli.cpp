#include <iomanip>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "picosync/analysis.hpp"
#include "picosync/config.hpp"
#include "picosync/engine.hpp"
#include "picosync/error.hpp"
#include "picosync/io.hpp"
#include "picosync/pulsechain.hpp"

namespace fs = std::filesystem;
using namespace picosync;

namespace {

ExperimentConfig load_or_default(const std::string& path) {
    return path.empty() ? default_config() : load_config(path);
}

void apply_sync(ExperimentConfig& cfg, const std::string& sync) {
    if (sync.empty()) return;
    cfg.sync.enabled = sync == "on";
}

int cmd_simulate(const std::string& config, const std::string& sync, std::optional<std::uint64_t> seed,
                 std::optional<std::uint64_t> slots) {
    ExperimentConfig cfg = load_or_default(config);
    apply_sync(cfg, sync);
    if (seed) cfg.master_seed = *seed;
    if (slots) cfg.n_slots = *slots;
    cfg.validate();
    const RunArtifacts a = run_experiment(cfg);
    const RunSummary& s = a.summary;
    std::cout << "output: " << a.dir.string() << '\n'
              << "sync: " << (cfg.sync.enabled ? "on" : "off") << ", slots: " << s.n_slots
              << ", pairs: " << s.n_pairs << '\n'
              << "singles: " << s.singles_1 << " / " << s.singles_2 << '\n'
              << "C = " << s.car.c_counts << ", A = " << s.car.a_mean_counts << '\n'
              << "CAR = " << s.car.car << " +- " << s.car.car_sigma << " (predicted " << s.prediction.car << ")\n"
              << "fidelity >= " << s.car.fidelity_bound << ", visibility >= " << s.car.visibility_bound << '\n';
    return 0;
}

int cmd_analyze(const std::string& a, const std::string& b, double window_ps, int peaks, double bin_ps,
                const std::string& hist_out) {
    const TagFile fa = read_tags(a);
    const TagFile fb = read_tags(b);
    if (fa.period != fb.period) throw std::runtime_error("tag files use different periods");
    CarOptions opt;
    opt.window_fs = std::llround(window_ps * 1e3);
    opt.period_fs = fa.period.value;
    opt.n_peaks = peaks;
    const std::int64_t bin = std::llround(bin_ps * 1e3);
    const std::int64_t range = (peaks + 1) * opt.period_fs + opt.window_fs;
    const Histogram h = coincidence_histogram(fa.tags, fb.tags, bin, range, fa.period);
    if (!hist_out.empty()) write_histogram_csv(hist_out, h);
    nlohmann::json j = to_json(car_from_histogram(h, opt));
    j["singles_a"] = fa.tags.size();
    j["singles_b"] = fb.tags.size();
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_pulsechain(const std::string& stage, const std::string& out) {
    const fs::path dir = out;
    fs::create_directories(dir);
    const PulseChainResult r = run_pulse_chain(PulseChainConfig{});
    const bool all = stage == "all";
    if (all) write_waveform_csv(dir / "input.csv", r.input);
    if (all || stage == "picoshort") write_waveform_csv(dir / "picoshort.csv", r.shortened);
    if (all || stage == "picoamp") write_waveform_csv(dir / "picoamp.csv", r.amplified);
    if (all || stage == "mzm") write_waveform_csv(dir / "mzm.csv", r.optical);
    std::cout << "picoshort FWHM: " << r.shortened_fwhm_fs * 1e-3 << " ps\n"
              << "picoamp gain: " << r.applied_gain_db << " dB, FWHM: " << r.amplified_fwhm_fs * 1e-3
              << " ps, peak: " << r.amplified.peak() << " V\n"
              << "optical FWHM: " << r.optical_fwhm_fs * 1e-3 << " ps, extinction: " << r.optical_extinction_db
              << " dB\n";
    return 0;
}

int cmd_calibrate(const std::string& config, const std::string& sync, double target) {
    ExperimentConfig cfg = load_or_default(config);
    apply_sync(cfg, sync);
    std::cout << std::setprecision(10);
    const ExperimentConfig c = calibrate_for_car(cfg, target);
    std::cout << "# predicted CAR " << predict_car(c).car << '\n';
    if (cfg.sync.enabled) {
        std::cout << "channel_1.raman_rate_per_slot = " << c.channel_1.raman_rate_per_slot << '\n'
                  << "channel_2.raman_rate_per_slot = " << c.channel_2.raman_rate_per_slot << '\n';
    } else {
        std::cout << "source.pair_prob_per_pulse = " << c.source.pair_prob_per_pulse << '\n';
    }
    return 0;
}

int cmd_report(const std::string& run) {
    const fs::path dir = run;
    std::ifstream mf(dir / "manifest.json");
    std::ifstream rf(dir / "car_report.json");
    if (!mf || !rf) throw std::runtime_error("not a run directory: " + dir.string());
    const auto manifest = nlohmann::json::parse(mf);
    const auto report = nlohmann::json::parse(rf);
    bool ok = true;
    for (const auto& f : manifest.at("files")) {
        const fs::path p = dir / f.at("file").get<std::string>();
        const bool match = fs::exists(p) && sha256_file(p) == f.at("sha256").get<std::string>();
        std::cout << (match ? "ok       " : "MISMATCH ") << p.filename().string() << '\n';
        ok = ok && match;
    }
    std::cout << "C = " << report.at("c_counts") << ", A = " << report.at("a_mean_counts")
              << ", CAR = " << report.at("car") << " +- " << report.at("car_sigma") << '\n'
              << "fidelity >= " << report.at("fidelity_bound") << ", visibility >= " << report.at("visibility_bound")
              << '\n'
              << "classical/werner/nonlocality: " << report.at("passes_classical") << '/'
              << report.at("passes_werner") << '/' << report.at("passes_nonlocality") << '\n';
    return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clock-synchronized photon-pair network simulator"};
    app.require_subcommand(1);

    std::string config, sync, tags_a, tags_b, hist_out, stage = "all", out = "pulsechain", run;
    std::optional<std::uint64_t> seed, slots;
    double window_ps = 200.0, bin_ps = 10.0, target = 42.0;
    int peaks = 10;

    auto* sim = app.add_subcommand("simulate", "Run a full experiment and write its artifacts");
    sim->add_option("--config", config, "Config file")->check(CLI::ExistingFile);
    sim->add_option("--sync", sync, "Clock distribution on|off")->check(CLI::IsMember({"on", "off"}));
    sim->add_option("--seed", seed, "Master seed");
    sim->add_option("--slots", slots, "Number of clock slots");

    auto* ana = app.add_subcommand("analyze", "Coincidence histogram and CAR from two tag files");
    ana->add_option("--tags-a", tags_a)->required()->check(CLI::ExistingFile);
    ana->add_option("--tags-b", tags_b)->required()->check(CLI::ExistingFile);
    ana->add_option("--window-ps", window_ps)->check(CLI::PositiveNumber);
    ana->add_option("--peaks", peaks)->check(CLI::PositiveNumber);
    ana->add_option("--bin-ps", bin_ps)->check(CLI::PositiveNumber);
    ana->add_option("--histogram", hist_out, "Also write the histogram CSV here");

    auto* pc = app.add_subcommand("pulsechain", "Simulate the pulse shaping chain");
    pc->add_option("--stage", stage)->check(CLI::IsMember({"all", "picoshort", "picoamp", "mzm"}));
    pc->add_option("--out", out);

    auto* cal = app.add_subcommand("calibrate", "Solve pair probability (sync off) or Raman rate (sync on)");
    cal->add_option("--target-car", target)->required();
    cal->add_option("--config", config)->check(CLI::ExistingFile);
    cal->add_option("--sync", sync)->check(CLI::IsMember({"on", "off"}));

    auto* rep = app.add_subcommand("report", "Verify and summarize a run directory");
    rep->add_option("--run", run)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*sim) return cmd_simulate(config, sync, seed, slots);
        if (*ana) return cmd_analyze(tags_a, tags_b, window_ps, peaks, bin_ps, hist_out);
        if (*pc) return cmd_pulsechain(stage, out);
        if (*cal) return cmd_calibrate(config, sync, target);
        if (*rep) return cmd_report(run);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
