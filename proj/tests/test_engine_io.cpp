#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "picosync/config.hpp"
#include "picosync/engine.hpp"
#include "picosync/error.hpp"
#include "picosync/io.hpp"

using namespace picosync;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("picosync_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

ExperimentConfig small_config(bool sync, std::uint64_t slots) {
    auto c = default_config();
    c.sync.enabled = sync;
    c.n_slots = slots;
    c.write_tags = false;
    return c;
}

}  // namespace

TEST_CASE("config defaults and parsing") {
    const auto d = default_config();
    CHECK(d.period().value == 5'000'000);
    CHECK(d.detector_1.efficiency * std::pow(10.0, -d.channel_1.loss_db / 10) == doctest::Approx(std::pow(10.0, -2.4)));
    CHECK(d.detector_2.efficiency * std::pow(10.0, -d.channel_2.loss_db / 10) == doctest::Approx(std::pow(10.0, -2.6)));

    const auto c = parse_config(R"(
# comment
source.pair_prob_per_pulse = 0.02   # trailing comment
detector_1.jitter_fwhm_ps = 60
channel_2.base_delay_us = 1.5
sync.enabled = false
run.n_slots = 1000
)");
    CHECK(c.source.pair_prob_per_pulse == 0.02);
    CHECK(c.detector_1.jitter_fwhm_fs.value == 60'000);
    CHECK(c.channel_2.base_delay_fs.value == 1'500'000'000);
    CHECK_FALSE(c.sync.enabled);
    CHECK(c.n_slots == 1000);
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse_config("source.nonsense = 1"), ConfigError);
    CHECK_THROWS_AS(parse_config("source.pair_prob_per_pulse"), ConfigError);
    CHECK_THROWS_AS(parse_config("source.pair_prob_per_pulse = abc"), ConfigError);
    CHECK_THROWS_AS(parse_config("run.n_slots = 0"), ConfigError);
    CHECK_THROWS_AS(parse_config("detector_1.efficiency = 1.5"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/picosync.conf"), ConfigError);
}

TEST_CASE("config text round-trips") {
    auto c = default_config();
    c.source.pair_prob_per_pulse = 0.0139183;
    c.channel_1.raman_rate_per_slot = 1.28073e-4;
    c.sync.enabled = false;
    c.master_seed = 99;
    const auto text = config_to_text(c);
    const auto back = parse_config(text);
    CHECK(config_to_text(back) == text);
    CHECK(config_entries(back) == config_entries(c));
}

TEST_CASE("QTAG round trips") {
    const auto dir = scratch("qtag");
    write_tags(dir / "empty.qtag", {}, kDefaultPeriod);
    auto f = read_tags(dir / "empty.qtag");
    CHECK(f.tags.empty());
    CHECK(fs::file_size(dir / "empty.qtag") == kQtagHeaderBytes);

    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::uint64_t> slot;
    std::uniform_int_distribution<std::int64_t> off(-5'000'000, 5'000'000);
    std::uniform_int_distribution<int> small(0, 2);
    std::vector<TimeTag> tags(1'000'000);
    for (auto& t : tags)
        t = TimeTag{static_cast<std::uint8_t>(small(rng) + 1), static_cast<std::uint8_t>(small(rng)),
                    Timestamp{slot(rng), off(rng)}, static_cast<TagKind>(small(rng))};
    write_tags(dir / "many.qtag", tags, DurationFs{4'000'000});
    f = read_tags(dir / "many.qtag");
    CHECK(f.period.value == 4'000'000);
    CHECK(f.tags == tags);
    CHECK(fs::file_size(dir / "many.qtag") == kQtagHeaderBytes + kQtagRecordBytes * tags.size());

    TagWriter w(dir / "stream.qtag", DurationFs{4'000'000});
    w.append(std::span(tags).first(1000));
    w.append(std::span(tags).subspan(1000, 500));
    w.close();
    CHECK(read_tags(dir / "stream.qtag").tags == std::vector<TimeTag>(tags.begin(), tags.begin() + 1500));
}

TEST_CASE("QTAG corruption is reported") {
    const auto dir = scratch("qtag_bad");
    std::vector<TimeTag> tags{TimeTag{1, 0, Timestamp{5, 7}, TagKind::dark}, TimeTag{1, 0, Timestamp{9, -3}, TagKind::signal}};
    write_tags(dir / "ok.qtag", tags, kDefaultPeriod);
    const auto good = slurp(dir / "ok.qtag");

    auto s = good;
    s[0] = 'X';
    spit(dir / "x.qtag", s);
    CHECK_THROWS_WITH_AS(read_tags(dir / "x.qtag"), "bad magic", TagFormatError);

    s = good;
    s[4] = 7;
    spit(dir / "v.qtag", s);
    CHECK_THROWS_WITH_AS(read_tags(dir / "v.qtag"), "unsupported version 7", TagFormatError);

    spit(dir / "h.qtag", good.substr(0, 10));
    CHECK_THROWS_WITH_AS(read_tags(dir / "h.qtag"), "truncated header", TagFormatError);

    spit(dir / "t.qtag", good.substr(0, good.size() - 5));
    CHECK_THROWS_WITH_AS(read_tags(dir / "t.qtag"), "truncated file at record 1", TagFormatError);

    s = good;
    s[kQtagHeaderBytes + 2] = 9;
    spit(dir / "k.qtag", s);
    CHECK_THROWS_WITH_AS(read_tags(dir / "k.qtag"), "bad tag kind at record 0", TagFormatError);

    spit(dir / "e.qtag", good + "zz");
    CHECK_THROWS_AS(read_tags(dir / "e.qtag"), TagFormatError);
}

TEST_CASE("SHA-256 of known strings") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("identical configurations give byte-identical artifacts") {
    const auto dir = scratch("det");
    auto c = default_config();
    c.n_slots = 20'000'000;
    c.output_dir = dir.string();
    c.source.pair_prob_per_pulse = 0.05;

    std::map<std::string, std::string> first;
    for (int run = 0; run < 2; ++run) {
        const auto art = run_experiment(c);
        std::map<std::string, std::string> files;
        for (const auto& p : {art.tags_1, art.tags_2, art.histogram_csv, art.car_report_json, art.rx_offset_csv})
            files[p.filename().string()] = slurp(p);
        auto manifest = nlohmann::json::parse(slurp(art.manifest_json));
        manifest.erase("wall_time_s");
        files["manifest"] = manifest.dump();
        if (run == 0) first = files;
        else CHECK(files == first);
    }
    CHECK(first.at("tags_node1.qtag").size() > kQtagHeaderBytes);
}

TEST_CASE("output directory override") {
    auto c = default_config();
    c.output_dir = "somewhere";
    CHECK(resolve_output_dir(c) == fs::path("somewhere"));
    setenv("PICOSYNC_OUTPUT_DIR", "/tmp/elsewhere", 1);
    CHECK(resolve_output_dir(c) == fs::path("/tmp/elsewhere"));
    unsetenv("PICOSYNC_OUTPUT_DIR");
}

TEST_CASE("Raman noise is removed when sync is off") {
    auto c = small_config(false, 50'000'000);
    c.channel_1.raman_rate_per_slot = 1e-3;
    c.channel_2.raman_rate_per_slot = 1e-3;
    CHECK(effective_config(c).channel_1.raman_rate_per_slot == 0.0);
    const auto off = simulate(c);
    CHECK(off.kinds_1[static_cast<int>(TagKind::raman)] == 0);
    CHECK(off.kinds_2[static_cast<int>(TagKind::raman)] == 0);
    c.sync.enabled = true;
    CHECK(effective_config(c).channel_1.raman_rate_per_slot == 1e-3);
    const auto on = simulate(c);
    CHECK(on.kinds_1[static_cast<int>(TagKind::raman)] > 0);
}

TEST_CASE("splitting the arm loss between fiber and detector leaves the tags unchanged") {
    std::vector<TimeTag> ref1, ref2;
    for (int variant = 0; variant < 2; ++variant) {
        auto c = small_config(false, 20'000'000);
        c.source.pair_prob_per_pulse = 0.05;
        // T = 0.5, eta = 0.5 against T = 1, eta = 0.25.
        c.channel_2.loss_db = variant == 0 ? 10.0 * std::log10(2.0) : 0.0;
        c.detector_2.efficiency = variant == 0 ? 0.5 : 0.25;
        std::vector<TimeTag> t1, t2;
        const auto s = simulate(c, [&](std::span<const TimeTag> a, std::span<const TimeTag> b) {
            t1.insert(t1.end(), a.begin(), a.end());
            t2.insert(t2.end(), b.begin(), b.end());
        });
        CHECK(s.singles_2 > 1000);
        if (variant == 0) {
            ref1 = t1;
            ref2 = t2;
        } else {
            CHECK(t1 == ref1);
            CHECK(t2 == ref2);
        }
    }
}

TEST_CASE("chunk size does not change the result") {
    auto c = small_config(true, 10'000'000);
    c.source.pair_prob_per_pulse = 0.05;
    c.channel_1.raman_rate_per_slot = 2e-4;
    const auto a = simulate(c);
    c.chunk_slots = 77'777;
    const auto b = simulate(c);
    CHECK(a.histogram.counts == b.histogram.counts);
    CHECK(a.singles_1 == b.singles_1);
    CHECK(a.singles_2 == b.singles_2);
}

TEST_CASE("throughput of at least 1e7 slots per second") {
    auto c = small_config(true, 200'000'000);
    c.source.pair_prob_per_pulse = 0.0139183;
    c.channel_1.raman_rate_per_slot = 1.28073e-4;
    c.channel_2.raman_rate_per_slot = 1.28073e-4;
    const auto t0 = std::chrono::steady_clock::now();
    simulate(c);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    MESSAGE("slots per second: " << 2e8 / s);
    CHECK(2e8 / s >= 1e7);
}

TEST_CASE("heralded loss estimate recovers the configured arm 2 loss") {
    auto c = small_config(false, 10'000'000'000);
    c.source.pair_prob_per_pulse = 0.01;
    const auto s = simulate(c);
    MESSAGE("arm 2 loss " << s.loss_arm_2_db << " dB, arm 1 loss " << s.loss_arm_1_db << " dB");
    CHECK(std::abs(s.loss_arm_2_db - 26.0) <= 0.5);
    CHECK(std::abs(s.loss_arm_1_db - 24.0) <= 0.5);
}

TEST_CASE("singles rates follow the configured efficiencies") {
    auto c = small_config(false, 400'000'000);
    c.source.pair_prob_per_pulse = 0.01;
    const auto s = simulate(c);
    const double mu = -std::log(1.0 - 0.01);  // prob_is_mean is false by default
    const double expect1 = static_cast<double>(c.n_slots) * mu * std::pow(10.0, -2.4);
    CHECK(std::abs(static_cast<double>(s.kinds_1[static_cast<int>(TagKind::signal)]) - expect1) <=
          4.0 * std::sqrt(expect1));
}
