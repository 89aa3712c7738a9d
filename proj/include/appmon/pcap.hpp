// Copyright 2026 the appmon authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Classic pcap (no pcapng) reader/writer: magic 0xa1b2c3d4, microsecond
// timestamps, linktype 1 (Ethernet). Reader detects byte order from the
// magic; writer emits host-independent little-endian files.

#ifndef APPMON_PCAP_HPP
#define APPMON_PCAP_HPP

#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "appmon/packet.hpp"

namespace appmon {

struct PcapError : std::runtime_error {
    explicit PcapError(const std::string& what) : std::runtime_error(what) {}
};

struct PcapRecord {
    uint64_t timestamp_us = 0;
    uint32_t wire_length = 0;
    Bytes bytes;
};

namespace detail {

constexpr uint32_t kPcapMagic = 0xa1b2c3d4;
constexpr uint32_t kPcapMagicSwapped = 0xd4c3b2a1;

inline uint32_t swap32(uint32_t v) {
    return v >> 24 | (v >> 8 & 0xff00) | (v << 8 & 0xff0000) | v << 24;
}
inline uint16_t swap16(uint16_t v) { return static_cast<uint16_t>(v >> 8 | v << 8); }

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

class PcapReader {
public:
    explicit PcapReader(const std::string& path)
        : file_(std::fopen(path.c_str(), "rb")) {
        if (!file_) throw PcapError("cannot open pcap file: " + path);
        uint8_t hdr[24];
        if (std::fread(hdr, 1, sizeof(hdr), file_.get()) != sizeof(hdr))
            throw PcapError("pcap file header truncated: " + path);
        uint32_t magic;
        std::memcpy(&magic, hdr, 4);
        if (magic == detail::kPcapMagic) {
            swapped_ = false;
        } else if (magic == detail::kPcapMagicSwapped) {
            swapped_ = true;
        } else {
            throw PcapError("not a classic pcap file (bad magic): " + path);
        }
        uint32_t linktype;
        std::memcpy(&linktype, hdr + 20, 4);
        if (swapped_) linktype = detail::swap32(linktype);
        if (linktype != 1) throw PcapError("unsupported pcap linktype (want Ethernet)");
    }

    // Returns the next record, or nullopt at end of file.
    std::optional<PcapRecord> next() {
        uint8_t rh[16];
        size_t n = std::fread(rh, 1, sizeof(rh), file_.get());
        if (n == 0) return std::nullopt;
        if (n != sizeof(rh)) throw PcapError("pcap record header truncated");
        uint32_t f[4];
        std::memcpy(f, rh, sizeof(f));
        if (swapped_)
            for (auto& v : f) v = detail::swap32(v);
        PcapRecord rec;
        rec.timestamp_us = static_cast<uint64_t>(f[0]) * 1000000 + f[1];
        rec.wire_length = f[3];
        rec.bytes.resize(f[2]);
        if (f[2] && std::fread(rec.bytes.data(), 1, f[2], file_.get()) != f[2])
            throw PcapError("pcap record data truncated");
        return rec;
    }

private:
    detail::FilePtr file_;
    bool swapped_ = false;
};

class PcapWriter {
public:
    explicit PcapWriter(const std::string& path)
        : file_(std::fopen(path.c_str(), "wb")) {
        if (!file_) throw PcapError("cannot create pcap file: " + path);
        const uint32_t hdr[6] = {detail::kPcapMagic, 0x00040002 /* v2.4 */, 0, 0,
                                 65535 /* snaplen */, 1 /* Ethernet */};
        uint8_t buf[24];
        for (int i = 0; i < 6; ++i) write_le32(buf + i * 4, hdr[i]);
        if (std::fwrite(buf, 1, sizeof(buf), file_.get()) != sizeof(buf))
            throw PcapError("pcap header write failed");
    }

    void write(uint64_t timestamp_us, uint32_t wire_length, std::span<const uint8_t> bytes) {
        uint8_t rh[16];
        write_le32(rh, static_cast<uint32_t>(timestamp_us / 1000000));
        write_le32(rh + 4, static_cast<uint32_t>(timestamp_us % 1000000));
        write_le32(rh + 8, static_cast<uint32_t>(bytes.size()));
        write_le32(rh + 12, wire_length);
        if (std::fwrite(rh, 1, sizeof(rh), file_.get()) != sizeof(rh) ||
            (!bytes.empty() &&
             std::fwrite(bytes.data(), 1, bytes.size(), file_.get()) != bytes.size()))
            throw PcapError("pcap record write failed");
        ++count_;
    }

    void write(const CapturedPacket& p) { write(p.timestamp_us, p.wire_length, p.bytes); }

    void flush() { std::fflush(file_.get()); }

    uint64_t count() const { return count_; }

private:
    static void write_le32(uint8_t* p, uint32_t v) {
        p[0] = static_cast<uint8_t>(v);
        p[1] = static_cast<uint8_t>(v >> 8);
        p[2] = static_cast<uint8_t>(v >> 16);
        p[3] = static_cast<uint8_t>(v >> 24);
    }

    detail::FilePtr file_;
    uint64_t count_ = 0;
};

inline std::vector<PcapRecord> read_pcap(const std::string& path) {
    PcapReader reader(path);
    std::vector<PcapRecord> out;
    while (auto rec = reader.next()) out.push_back(std::move(*rec));
    return out;
}

inline void write_pcap(const std::string& path, const std::vector<CapturedPacket>& packets) {
    PcapWriter w(path);
    for (const auto& p : packets) w.write(p);
}

}  // namespace appmon

#endif  // APPMON_PCAP_HPP
