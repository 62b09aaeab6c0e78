#include "picosync/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstring>
#include <iomanip>
#include <sstream>

namespace picosync {

namespace {

void put_u16(unsigned char* p, std::uint16_t v) {
    p[0] = static_cast<unsigned char>(v);
    p[1] = static_cast<unsigned char>(v >> 8);
}

void put_u64(unsigned char* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

std::uint16_t get_u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::array<unsigned char, kQtagHeaderBytes> header(DurationFs period, std::uint64_t count) {
    std::array<unsigned char, kQtagHeaderBytes> h{};
    std::memcpy(h.data(), "QTAG", 4);
    put_u16(h.data() + 4, kQtagVersion);
    put_u64(h.data() + 6, static_cast<std::uint64_t>(period.value));
    put_u64(h.data() + 14, count);
    return h;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace

TagWriter::TagWriter(const std::filesystem::path& path, DurationFs period) : path_(path), out_(open_out(path)) {
    if (period.value <= 0) throw TagFormatError("period must be positive");
    const auto h = header(period, 0);
    out_.write(reinterpret_cast<const char*>(h.data()), h.size());
}

TagWriter::~TagWriter() {
    try {
        close();
    } catch (...) {
    }
}

void TagWriter::append(std::span<const TimeTag> tags) {
    if (!out_.is_open()) throw std::logic_error("TagWriter: append after close");
    buffer_.resize(tags.size() * kQtagRecordBytes);
    unsigned char* p = buffer_.data();
    for (const auto& t : tags) {
        p[0] = t.node_id;
        p[1] = t.channel_id;
        p[2] = static_cast<unsigned char>(t.kind);
        p[3] = 0;
        put_u64(p + 4, t.t.slot);
        put_u64(p + 12, static_cast<std::uint64_t>(t.t.offset_fs));
        p += kQtagRecordBytes;
    }
    out_.write(reinterpret_cast<const char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
    if (!out_) throw std::runtime_error("write failed: " + path_.string());
    count_ += tags.size();
}

void TagWriter::close() {
    if (!out_.is_open()) return;
    unsigned char c[8];
    put_u64(c, count_);
    out_.seekp(14);
    out_.write(reinterpret_cast<const char*>(c), 8);
    out_.close();
    if (!out_) throw std::runtime_error("write failed: " + path_.string());
}

void write_tags(const std::filesystem::path& path, std::span<const TimeTag> tags, DurationFs period) {
    TagWriter w(path, period);
    w.append(tags);
    w.close();
}

TagFile read_tags(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::array<unsigned char, kQtagHeaderBytes> h{};
    in.read(reinterpret_cast<char*>(h.data()), h.size());
    if (in.gcount() < 4 || std::memcmp(h.data(), "QTAG", 4) != 0) throw TagFormatError("bad magic");
    if (static_cast<std::size_t>(in.gcount()) < h.size()) throw TagFormatError("truncated header");
    const std::uint16_t version = get_u16(h.data() + 4);
    if (version != kQtagVersion) throw TagFormatError("unsupported version " + std::to_string(version));
    TagFile f;
    f.period = DurationFs{static_cast<std::int64_t>(get_u64(h.data() + 6))};
    if (f.period.value <= 0) throw TagFormatError("invalid period in header");
    const std::uint64_t count = get_u64(h.data() + 14);

    std::array<unsigned char, kQtagRecordBytes> r{};
    f.tags.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
    for (std::uint64_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(r.data()), r.size());
        if (static_cast<std::size_t>(in.gcount()) != r.size())
            throw TagFormatError("truncated file at record " + std::to_string(i));
        if (r[2] > static_cast<unsigned char>(TagKind::dark))
            throw TagFormatError("bad tag kind at record " + std::to_string(i));
        TimeTag t;
        t.node_id = r[0];
        t.channel_id = r[1];
        t.kind = static_cast<TagKind>(r[2]);
        t.t.slot = get_u64(r.data() + 4);
        t.t.offset_fs = static_cast<std::int64_t>(get_u64(r.data() + 12));
        f.tags.push_back(t);
    }
    if (in.peek() != std::char_traits<char>::eof()) throw TagFormatError("trailing bytes after last record");
    return f;
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h) {
    auto out = open_out(path);
    out << "bin_center_fs,counts\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        out << static_cast<std::int64_t>(h.bin_center_fs(i)) << ',' << h.counts[i] << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_series_csv(const std::filesystem::path& path, const ClockPhaseSeries& s) {
    auto out = open_out(path);
    out << "time_s,offset_fs\n" << std::setprecision(12);
    for (std::size_t i = 0; i < s.size(); ++i) out << s.time_s[i] << ',' << s.offset_fs[i] << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_waveform_csv(const std::filesystem::path& path, const Waveform& w) {
    auto out = open_out(path);
    out << "t_fs,value\n" << std::setprecision(10);
    for (std::size_t i = 0; i < w.size(); ++i) out << w.time_at(i) << ',' << w.samples[i] << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

std::string finish_digest(EVP_MD_CTX* ctx) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return finish_digest(ctx);
}

std::string sha256_hex(std::string_view data) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    EVP_DigestUpdate(ctx, data.data(), data.size());
    return finish_digest(ctx);
}

}  // namespace picosync
