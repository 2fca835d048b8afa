#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hsps {

enum class Channel : std::uint8_t { Signal = 0, Idler1 = 1, Idler2 = 2 };

inline constexpr int kChannelCount = 3;

struct TagEvent {
    std::int64_t timestamp_ps = 0;
    Channel channel = Channel::Signal;

    friend bool operator==(const TagEvent&, const TagEvent&) = default;
};

struct StreamHeader {
    double repetition_rate_hz = 0.0;
    // Zero when unknown (the binary format does not carry it).
    double duration_s = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t n_pulses = 0;
    std::string model_snapshot;
};

struct TagStream {
    StreamHeader header;
    std::vector<TagEvent> events;

    // Sorts events by (timestamp, channel).
    void canonicalize();
    bool is_sorted_per_channel() const;
};

// Binary layout, little-endian:
//   "HSPSTAG1" | version u32 | repetition_rate_hz f64 | n_events u64 | seed u64
//   then n_events x (channel u8, timestamp_ps i64), packed.
inline constexpr char kTagMagic[8] = {'H', 'S', 'P', 'S', 'T', 'A', 'G', '1'};
inline constexpr std::uint32_t kTagVersion = 1;

void write_binary(std::ostream& out, const TagStream& stream);
TagStream read_binary(std::istream& in);

// CSV twin: `# key=value` header comments, a `channel,timestamp_ps` column
// line, then one event per line.
void write_csv(std::ostream& out, const TagStream& stream);
TagStream read_csv(std::istream& in, const std::string& origin = "csv");

// Dispatches on extension: `.csv` is text, anything else is binary.
void save_stream(const std::filesystem::path& path, const TagStream& stream);
TagStream load_stream(const std::filesystem::path& path);

}  // namespace hsps
