#include "picosync/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "picosync/error.hpp"
#include "picosync/io.hpp"
#include "picosync/source.hpp"

namespace picosync {

namespace {

constexpr const char* kVersion = "0.1.0";

SyncConfig effective_sync(const ExperimentConfig& cfg) {
    SyncConfig s = cfg.sync;
    // Transmitter edge jitter reaches the receiver as measurement noise.
    s.rec_jitter_fwhm_fs = std::hypot(cfg.sync.rec_jitter_fwhm_fs, cfg.tx.jitter_fwhm_fs);
    return s;
}

std::string arm_name(const char* what, int arm) { return std::string(what) + "_" + std::to_string(arm); }

const ChannelConfig& channel_of(const ExperimentConfig& c, int arm) { return arm == 1 ? c.channel_1 : c.channel_2; }
const DetectorConfig& detector_of(const ExperimentConfig& c, int arm) { return arm == 1 ? c.detector_1 : c.detector_2; }
const OscillatorConfig& node_of(const ExperimentConfig& c, int arm) { return arm == 1 ? c.node_1 : c.node_2; }

double sq(double x) { return x * x; }

// One fiber arm with its detector and node clock.
struct Arm {
    Arm(const ExperimentConfig& cfg, int arm)
        : timebase(cfg.period()),
          channel(channel_of(cfg, arm), derive_seed(cfg.master_seed, arm_name("channel", arm))),
          detector(detector_of(cfg, arm), cfg.period(), derive_seed(cfg.master_seed, arm_name("detector", arm)),
                   static_cast<std::uint8_t>(arm), 0),
          clock(make_node_clock(cfg, arm)),
          split_rng(derive_seed(cfg.master_seed, arm_name("transmission", arm))),
          pass_probability(channel.transmission() * detector.config().efficiency),
          base_delay(static_cast<double>(channel.config().base_delay_fs.value)) {}

    // Stamps every photon on the node clock at its emission slot, so queries
    // to the clock stay in slot order across signal, noise and samples.
    void process(std::span<const PairEmission> emissions, std::uint64_t begin, std::uint64_t end,
                 std::uint64_t series_every, std::vector<double>& series, std::vector<TimeTag>& tags) {
        raman.clear();
        channel.sample_raman_emissions(begin, end, raman);
        arrivals.clear();
        std::uint64_t next_sample = (begin + series_every - 1) / series_every * series_every;

        std::size_t i = 0, j = 0;
        while (true) {
            const std::uint64_t se = i < emissions.size() ? emissions[i].slot : UINT64_MAX;
            const std::uint64_t sr = j < raman.size() ? raman[j].slot : UINT64_MAX;
            const std::uint64_t ss = next_sample < end ? next_sample : UINT64_MAX;
            if (se == UINT64_MAX && sr == UINT64_MAX && ss == UINT64_MAX) break;
            if (se <= sr && se <= ss) {
                const PairEmission& e = emissions[i++];
                if (uniform01(split_rng) < pass_probability) stamp(e.t_emit, e.slot, TagKind::signal);
            } else if (sr <= ss) {
                const Timestamp r = raman[j++];
                if (detector.accepts()) stamp(r, r.slot, TagKind::raman);
            } else {
                series.push_back(clock.offset_fs(next_sample) + clock.edge_jitter_fs() - base_delay);
                next_sample += series_every;
            }
        }
        std::stable_sort(arrivals.begin(), arrivals.end(),
                         [o = timebase.ordering()](const Arrival& a, const Arrival& b) { return o(a.t, b.t); });
        detector.process(arrivals, begin, end, tags);
    }

    void stamp(Timestamp t_emit, std::uint64_t slot, TagKind kind) {
        const Timestamp at = channel.arrival(t_emit);
        const double node = clock.offset_fs(slot) + clock.edge_jitter_fs();
        arrivals.push_back({timebase.shift(at, -round_fs(node)), kind});
    }

    Timebase timebase;
    Channel channel;
    Detector detector;
    NodeClock clock;
    Rng split_rng;
    double pass_probability;
    double base_delay;
    std::vector<Timestamp> raman;
    std::vector<Arrival> arrivals;
};

}  // namespace

ExperimentConfig effective_config(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.sync_period();
    if (!c.sync.enabled) {
        c.channel_1.raman_rate_per_slot = 0.0;
        c.channel_2.raman_rate_per_slot = 0.0;
    }
    return c;
}

NodeClock make_node_clock(const ExperimentConfig& cfg, int arm) {
    const ChannelConfig& ch = channel_of(cfg, arm);
    const std::uint64_t channel_seed = derive_seed(cfg.master_seed, arm_name("channel", arm));
    return NodeClock(effective_sync(cfg), node_of(cfg, arm), ch.base_delay_fs, ch.drift,
                     derive_seed(channel_seed, "drift"), cfg.period(),
                     derive_seed(cfg.master_seed, arm_name("clock", arm)));
}

ClockPhaseSeries simulate_rx_offset(const ExperimentConfig& cfg, std::uint64_t begin, std::uint64_t end,
                                    std::uint64_t every) {
    NodeClock c1 = make_node_clock(cfg, 1);
    NodeClock c2 = make_node_clock(cfg, 2);
    const double d1 = static_cast<double>(cfg.channel_1.base_delay_fs.value);
    const double d2 = static_cast<double>(cfg.channel_2.base_delay_fs.value);
    ClockPhaseSeries s;
    const double period_s = cfg.period().seconds();
    for (std::uint64_t slot = begin; slot < end; slot += every) {
        const double a = c1.offset_fs(slot) + c1.edge_jitter_fs() - d1;
        const double b = c2.offset_fs(slot) + c2.edge_jitter_fs() - d2;
        s.time_s.push_back(static_cast<double>(slot) * period_s);
        s.offset_fs.push_back(a - b);
    }
    return s;
}

double node_clock_sigma_fs(const ExperimentConfig& cfg, int arm) {
    const OscillatorConfig& local = node_of(cfg, arm);
    const double edge = fwhm_to_sigma(local.jitter_fwhm_fs);
    if (cfg.sync.enabled) return std::hypot(loop_residual_sigma(effective_sync(cfg), local), edge);
    // A free walk averaged over the run spreads tags by walk^2 * duration / 2.
    const double duration = static_cast<double>(cfg.n_slots) * cfg.period().seconds();
    return std::sqrt(sq(local.phase_walk_fs_per_sqrt_s) * duration / 2.0 + sq(edge));
}

CarModel car_model(const ExperimentConfig& raw) {
    const ExperimentConfig cfg = effective_config(raw);
    const double period = static_cast<double>(cfg.period().value);
    CarModel m;
    m.mu = cfg.source.mean_pairs();
    m.multi_pair_factor = cfg.source.multi_pair_factor();
    m.window_fs = static_cast<double>(cfg.analysis.window_fs);
    m.period_fs = period;
    double tag_var[2] = {0.0, 0.0};
    for (int arm = 1; arm <= 2; ++arm) {
        const ChannelConfig& ch = channel_of(cfg, arm);
        const DetectorConfig& det = detector_of(cfg, arm);
        const double bin = static_cast<double>(det.tdc_bin_fs.value);
        const double var = sq(fwhm_to_sigma(static_cast<double>(det.jitter_fwhm_fs.value))) +
                           sq(fwhm_to_sigma(static_cast<double>(det.tdc_jitter_fwhm_fs.value))) +
                           (bin > 1.0 ? bin * bin / 12.0 : 0.0) + sq(node_clock_sigma_fs(cfg, arm));
        tag_var[arm - 1] = var;
        ArmModel& a = arm == 1 ? m.arm1 : m.arm2;
        a.eta = ch.transmission() * det.efficiency;
        a.pair_sigma_fs = std::sqrt(sq(cfg.source.emission_sigma_fs) + var);
        if (ch.raman_rate_per_slot > 0.0)
            a.noise.push_back({ch.raman_rate_per_slot * det.efficiency, static_cast<double>(ch.raman_window().value)});
        if (det.dark_rate_hz > 0.0) a.noise.push_back({det.dark_rate_hz * cfg.period().seconds(), period});
    }
    m.true_sigma_fs = std::sqrt(tag_var[0] + tag_var[1]);
    return m;
}

CarPrediction predict_car(const ExperimentConfig& cfg) { return predict_car(car_model(cfg)); }

ExperimentConfig calibrate_for_car(const ExperimentConfig& cfg, double target) {
    if (!(target > 1.0)) throw ConfigError("target CAR must exceed 1");
    ExperimentConfig c = cfg;
    if (!cfg.sync.enabled) {
        const auto car_at = [&](double p) {
            ExperimentConfig t = c;
            t.source.pair_prob_per_pulse = p;
            return predict_car(t).car;
        };
        // Below some pair probability dark counts win and CAR falls again;
        // the solution is taken on the branch above the maximum.
        double lo = 1e-9;
        double best = car_at(lo);
        for (double p = lo; p <= 0.5; p *= 1.25) {
            const double v = car_at(p);
            if (v > best) {
                best = v;
                lo = p;
            }
        }
        const double hi = 0.5;
        if (best < target) throw ConfigError("target CAR above what the configured noise allows");
        if (car_at(hi) > target) throw ConfigError("target CAR below the multi-pair limit");
        c.source.pair_prob_per_pulse = bisect_decreasing(car_at, lo, hi, target);
        return c;
    }
    const auto car_at = [&](double r) {
        ExperimentConfig t = c;
        t.channel_1.raman_rate_per_slot = r;
        t.channel_2.raman_rate_per_slot = r;
        return predict_car(t).car;
    };
    if (car_at(0.0) < target) throw ConfigError("target CAR above the noise-free value");
    double hi = 1e-9;
    while (car_at(hi) > target) {
        hi *= 2.0;
        if (hi > 10.0) throw ConfigError("no Raman rate reaches the target CAR");
    }
    const double r = bisect_decreasing(car_at, 0.0, hi, target);
    c.channel_1.raman_rate_per_slot = r;
    c.channel_2.raman_rate_per_slot = r;
    return c;
}

RunSummary simulate(const ExperimentConfig& raw, const ChunkCallback& on_chunk) {
    const ExperimentConfig cfg = effective_config(raw);
    cfg.validate();
    const DurationFs period = cfg.period();
    const std::int64_t range =
        (cfg.analysis.n_peaks + cfg.analysis.exclude_center_neighbors + 1) * period.value + cfg.analysis.window_fs;

    PairSource source(cfg.source, derive_seed(cfg.master_seed, "source"));
    Arm arm1(cfg, 1);
    Arm arm2(cfg, 2);
    CoincidenceCounter counter(cfg.analysis.bin_fs, range, period);

    RunSummary s;
    s.n_slots = cfg.n_slots;
    s.duration_s = static_cast<double>(cfg.n_slots) * period.seconds();
    std::vector<PairEmission> emissions;
    std::vector<TimeTag> tags1, tags2;
    std::vector<double> series1, series2;

    const auto release = [&](Timestamp watermark, bool last) {
        for (const auto& t : tags1) ++s.kinds_1[static_cast<std::size_t>(t.kind)];
        for (const auto& t : tags2) ++s.kinds_2[static_cast<std::size_t>(t.kind)];
        s.singles_1 += tags1.size();
        s.singles_2 += tags2.size();
        if (on_chunk) on_chunk(tags1, tags2);
        counter.push(tags1, tags2, watermark);
        if (last) counter.finish();
        tags1.clear();
        tags2.clear();
    };

    for (std::uint64_t begin = 0; begin < cfg.n_slots;) {
        const std::uint64_t end = begin + std::min(cfg.chunk_slots, cfg.n_slots - begin);
        emissions.clear();
        source.generate(begin, end, emissions);
        s.n_pairs += emissions.size();
        series1.clear();
        series2.clear();
        arm1.process(emissions, begin, end, cfg.series_every_slots, series1, tags1);
        arm2.process(emissions, begin, end, cfg.series_every_slots, series2, tags2);
        const std::uint64_t first_sample = (begin + cfg.series_every_slots - 1) / cfg.series_every_slots;
        for (std::size_t k = 0; k < series1.size(); ++k) {
            const auto slot = (first_sample + k) * cfg.series_every_slots;
            s.rx_offset.time_s.push_back(static_cast<double>(slot) * period.seconds());
            s.rx_offset.offset_fs.push_back(series1[k] - series2[k]);
        }
        release(Timestamp{end - 1, 0}, false);
        begin = end;
    }
    arm1.detector.finish(tags1);
    arm2.detector.finish(tags2);
    release(Timestamp{cfg.n_slots, 0}, true);

    s.histogram = counter.histogram();
    CarOptions opt;
    opt.window_fs = cfg.analysis.window_fs;
    opt.period_fs = period.value;
    opt.n_peaks = cfg.analysis.n_peaks;
    opt.exclude_center_neighbors = cfg.analysis.exclude_center_neighbors;
    s.car = car_from_histogram(s.histogram, opt);
    s.prediction = predict_car(cfg);

    const double net = static_cast<double>(s.car.c_counts) - s.car.a_mean_counts;
    s.loss_arm_1_db = s.loss_arm_2_db = std::numeric_limits<double>::quiet_NaN();
    if (net > 0.0) {
        const double rate = net / s.duration_s;
        if (s.singles_1 > 0 && net <= static_cast<double>(s.singles_1))
            s.loss_arm_2_db = loss_estimate(rate, static_cast<double>(s.singles_1) / s.duration_s);
        if (s.singles_2 > 0 && net <= static_cast<double>(s.singles_2))
            s.loss_arm_1_db = loss_estimate(rate, static_cast<double>(s.singles_2) / s.duration_s);
    }

    if (s.rx_offset.size() >= 10) {
        s.jitter = jitter_stats(s.rx_offset, cfg.analysis.jitter_window_s);
        s.clock_sigma_fs = s.jitter->stdev_fs;
    } else {
        s.clock_sigma_fs = std::hypot(node_clock_sigma_fs(cfg, 1), node_clock_sigma_fs(cfg, 2));
    }
    if (s.clock_sigma_fs > 0.0) s.max_rate_hz = rate_upper_bound_hz(s.clock_sigma_fs, cfg.analysis.rate_guard);
    return s;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv("PICOSYNC_OUTPUT_DIR"); env && *env) return env;
    return cfg.output_dir;
}

nlohmann::json to_json(const CarReport& r) {
    const auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"c_counts", r.c_counts},
            {"a_mean_counts", r.a_mean_counts},
            {"a_total_counts", r.a_total_counts},
            {"car", num(r.car)},
            {"car_sigma", num(r.car_sigma)},
            {"car_infinite", r.car_infinite},
            {"fidelity_bound", r.fidelity_bound},
            {"visibility_bound", r.visibility_bound},
            {"passes_classical", r.passes_classical},
            {"passes_werner", r.passes_werner},
            {"passes_nonlocality", r.passes_nonlocality},
            {"window_fs", r.window_fs},
            {"center_fs", r.center_fs},
            {"n_accidental_peaks_used", r.n_accidental_peaks_used}};
}

nlohmann::json to_json(const RunSummary& s) {
    const auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    nlohmann::json j = {{"n_slots", s.n_slots},
                        {"duration_s", s.duration_s},
                        {"n_pairs", s.n_pairs},
                        {"singles_1", s.singles_1},
                        {"singles_2", s.singles_2},
                        {"tags_by_kind_1", {{"signal", s.kinds_1[0]}, {"raman", s.kinds_1[1]}, {"dark", s.kinds_1[2]}}},
                        {"tags_by_kind_2", {{"signal", s.kinds_2[0]}, {"raman", s.kinds_2[1]}, {"dark", s.kinds_2[2]}}},
                        {"loss_arm_1_db", num(s.loss_arm_1_db)},
                        {"loss_arm_2_db", num(s.loss_arm_2_db)},
                        {"predicted_car", num(s.prediction.car)},
                        {"clock_sigma_fs", s.clock_sigma_fs},
                        {"max_rate_hz", num(s.max_rate_hz)}};
    if (s.jitter) {
        j["jitter"] = {{"stdev_fs", s.jitter->stdev_fs},
                       {"peak_to_peak_fs", s.jitter->peak_to_peak_fs},
                       {"drift_fs_over_span", s.jitter->drift_fs_over_span},
                       {"windows", s.jitter->windows}};
    }
    return j;
}

RunArtifacts run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto started = std::chrono::steady_clock::now();
    RunArtifacts a;
    a.dir = resolve_output_dir(cfg);
    std::filesystem::create_directories(a.dir);
    a.tags_1 = a.dir / "tags_node1.qtag";
    a.tags_2 = a.dir / "tags_node2.qtag";
    a.histogram_csv = a.dir / "histogram.csv";
    a.car_report_json = a.dir / "car_report.json";
    a.rx_offset_csv = a.dir / "rx_offset.csv";
    a.manifest_json = a.dir / "manifest.json";

    std::optional<TagWriter> w1, w2;
    if (cfg.write_tags) {
        w1.emplace(a.tags_1, cfg.period());
        w2.emplace(a.tags_2, cfg.period());
    }
    a.summary = simulate(cfg, [&](std::span<const TimeTag> t1, std::span<const TimeTag> t2) {
        if (w1) w1->append(t1);
        if (w2) w2->append(t2);
    });
    if (w1) w1->close();
    if (w2) w2->close();

    write_histogram_csv(a.histogram_csv, a.summary.histogram);
    write_series_csv(a.rx_offset_csv, a.summary.rx_offset);

    const std::string config_text = config_to_text(cfg);
    nlohmann::json config_echo;
    for (const auto& [k, v] : config_entries(cfg)) config_echo[k] = v;
    nlohmann::json report = to_json(a.summary.car);
    report["run"] = to_json(a.summary);
    report["config"] = config_echo;
    report["metadata"] = {{"version", kVersion}, {"config_sha256", sha256_hex(config_text)}};
    {
        std::ofstream out(a.car_report_json);
        out << report.dump(2) << '\n';
        if (!out) throw std::runtime_error("write failed: " + a.car_report_json.string());
    }

    std::vector<std::filesystem::path> files{a.histogram_csv, a.car_report_json, a.rx_offset_csv};
    if (cfg.write_tags) files.insert(files.begin(), {a.tags_1, a.tags_2});
    nlohmann::json listed = nlohmann::json::array();
    std::string all;
    for (const auto& f : files) {
        const std::string h = sha256_file(f);
        all += h;
        listed.push_back({{"file", f.filename().string()}, {"sha256", h}, {"bytes", std::filesystem::file_size(f)}});
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    nlohmann::json manifest = {{"version", kVersion},
                               {"config", config_echo},
                               {"files", listed},
                               {"combined_sha256", sha256_hex(all)},
                               {"wall_time_s", wall}};
    std::ofstream out(a.manifest_json);
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + a.manifest_json.string());
    return a;
}

}  // namespace picosync
