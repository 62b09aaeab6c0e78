#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "picosync/analysis.hpp"
#include "picosync/detector.hpp"
#include "picosync/pulsechain.hpp"
#include "picosync/sync.hpp"

namespace picosync {

class TagFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// QTAG layout, little-endian:
//   header: "QTAG", u16 version, u64 period_fs, u64 record_count  (22 bytes)
//   record: u8 node, u8 channel, u8 kind, u8 pad, u64 slot, i64 offset_fs
inline constexpr std::uint16_t kQtagVersion = 1;
inline constexpr std::size_t kQtagHeaderBytes = 22;
inline constexpr std::size_t kQtagRecordBytes = 24;

struct TagFile {
    DurationFs period = kDefaultPeriod;
    std::vector<TimeTag> tags;
};

/// Streaming writer; the record count in the header is patched on close().
class TagWriter {
public:
    TagWriter(const std::filesystem::path& path, DurationFs period);
    ~TagWriter();
    TagWriter(const TagWriter&) = delete;
    TagWriter& operator=(const TagWriter&) = delete;

    void append(std::span<const TimeTag> tags);
    void close();
    std::uint64_t count() const { return count_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::uint64_t count_ = 0;
    std::vector<unsigned char> buffer_;
};

void write_tags(const std::filesystem::path& path, std::span<const TimeTag> tags, DurationFs period);
TagFile read_tags(const std::filesystem::path& path);

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h);
void write_series_csv(const std::filesystem::path& path, const ClockPhaseSeries& s);
void write_waveform_csv(const std::filesystem::path& path, const Waveform& w);

/// Lower-case hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view data);

}  // namespace picosync
