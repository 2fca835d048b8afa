#include "hsps/tagstream.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "hsps/detail/text.hpp"
#include "hsps/error.hpp"

namespace hsps {

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
    std::array<unsigned char, sizeof(T)> bytes{};
    std::uint64_t bits = 0;
    if constexpr (sizeof(T) == 8)
        bits = std::bit_cast<std::uint64_t>(value);
    else if constexpr (sizeof(T) == 4)
        bits = std::bit_cast<std::uint32_t>(value);
    else
        bits = static_cast<std::uint8_t>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
        throw IoError("truncated tag stream");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= std::uint64_t(bytes[i]) << (8 * i);
    if constexpr (sizeof(T) == 8)
        return std::bit_cast<T>(bits);
    else if constexpr (sizeof(T) == 4)
        return std::bit_cast<T>(static_cast<std::uint32_t>(bits));
    else
        return static_cast<T>(bits);
}

Channel to_channel(long long raw, const std::string& where) {
    if (raw < 0 || raw >= kChannelCount)
        throw IoError(where + ": channel " + std::to_string(raw) + " outside {0, 1, 2}");
    return static_cast<Channel>(raw);
}

}  // namespace

void TagStream::canonicalize() {
    std::sort(events.begin(), events.end(), [](const TagEvent& a, const TagEvent& b) {
        return a.timestamp_ps != b.timestamp_ps ? a.timestamp_ps < b.timestamp_ps
                                                : a.channel < b.channel;
    });
}

bool TagStream::is_sorted_per_channel() const {
    std::array<std::int64_t, kChannelCount> last;
    last.fill(INT64_MIN);
    for (const auto& e : events) {
        auto& l = last[static_cast<std::size_t>(e.channel)];
        if (e.timestamp_ps < l) return false;
        l = e.timestamp_ps;
    }
    return true;
}

void write_binary(std::ostream& out, const TagStream& stream) {
    out.write(kTagMagic, sizeof(kTagMagic));
    put_le<std::uint32_t>(out, kTagVersion);
    put_le<double>(out, stream.header.repetition_rate_hz);
    put_le<std::uint64_t>(out, stream.events.size());
    put_le<std::uint64_t>(out, stream.header.seed);
    for (const auto& e : stream.events) {
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(e.channel));
        put_le<std::int64_t>(out, e.timestamp_ps);
    }
    if (!out) throw IoError("failed writing tag stream");
}

TagStream read_binary(std::istream& in) {
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kTagMagic, sizeof(magic)) != 0)
        throw IoError("not a tag stream: bad magic");
    const auto version = get_le<std::uint32_t>(in);
    if (version != kTagVersion)
        throw IoError("unsupported tag stream version " + std::to_string(version));
    TagStream stream;
    stream.header.repetition_rate_hz = get_le<double>(in);
    const auto n = get_le<std::uint64_t>(in);
    stream.header.seed = get_le<std::uint64_t>(in);
    stream.events.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto ch = get_le<std::uint8_t>(in);
        const auto ts = get_le<std::int64_t>(in);
        stream.events.push_back({ts, to_channel(ch, "record " + std::to_string(i))});
    }
    return stream;
}

void write_csv(std::ostream& out, const TagStream& stream) {
    out.precision(17);
    out << "# repetition_rate_hz=" << stream.header.repetition_rate_hz << '\n';
    out << "# duration_s=" << stream.header.duration_s << '\n';
    out << "# seed=" << stream.header.seed << '\n';
    out << "# n_pulses=" << stream.header.n_pulses << '\n';
    out << "channel,timestamp_ps\n";
    for (const auto& e : stream.events)
        out << static_cast<int>(e.channel) << ',' << e.timestamp_ps << '\n';
}

TagStream read_csv(std::istream& in, const std::string& origin) {
    TagStream stream;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto view = detail::trim(line);
        if (view.empty()) continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        if (view.front() == '#') {
            view = detail::trim(view.substr(1));
            const auto eq = view.find('=');
            if (eq == std::string_view::npos) continue;
            const auto key = detail::trim(view.substr(0, eq));
            const auto value = detail::trim(view.substr(eq + 1));
            if (key == "repetition_rate_hz") {
                stream.header.repetition_rate_hz = detail::parse_double(value).value_or(0.0);
            } else if (key == "duration_s") {
                stream.header.duration_s = detail::parse_double(value).value_or(0.0);
            } else if (key == "seed") {
                stream.header.seed = std::uint64_t(detail::parse_int(value).value_or(0));
            } else if (key == "n_pulses") {
                stream.header.n_pulses = std::uint64_t(detail::parse_int(value).value_or(0));
            }
            continue;
        }
        if (view.starts_with("channel")) continue;
        const auto fields = detail::split_fields(view, ",");
        auto ch = fields.size() == 2 ? detail::parse_int(fields[0]) : std::nullopt;
        auto ts = fields.size() == 2 ? detail::parse_int(fields[1]) : std::nullopt;
        if (!ch || !ts) throw IoError(where + ": expected 'channel,timestamp_ps'");
        stream.events.push_back({*ts, to_channel(*ch, where)});
    }
    return stream;
}

void save_stream(const std::filesystem::path& path, const TagStream& stream) {
    const bool csv = path.extension() == ".csv";
    std::ofstream out(path, csv ? std::ios::out : std::ios::out | std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    if (csv)
        write_csv(out, stream);
    else
        write_binary(out, stream);
}

TagStream load_stream(const std::filesystem::path& path) {
    const bool csv = path.extension() == ".csv";
    std::ifstream in(path, csv ? std::ios::in : std::ios::in | std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return csv ? read_csv(in, path.string()) : read_binary(in);
}

}  // namespace hsps
