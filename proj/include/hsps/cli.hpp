#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hsps::cli {

// INI-style experiment description:
//
//   [section]            or   [section.name] for repeatable sections
//   key = value          # comment
//
// Every section and key is checked against a fixed schema when parsed and
// when overridden, so typos abort before any computation starts. Relative
// paths resolve against the directory of the scenario file.
class Scenario {
public:
    struct Entry {
        std::string value;
        std::string origin;  // "file:line" or "--set"
    };

    static Scenario parse(std::istream& in, const std::string& origin,
                          const std::filesystem::path& base_dir);
    static Scenario load(const std::filesystem::path& path);

    // Applies `section.key=value`; the section may itself contain dots.
    void set(std::string_view assignment);

    bool has_section(std::string_view section) const;
    // Names of `[prefix.name]` sections, in file order.
    std::vector<std::string> named_sections(std::string_view prefix) const;
    bool has(std::string_view section, std::string_view key) const;

    std::string text(std::string_view section, std::string_view key,
                     std::optional<std::string> fallback = std::nullopt) const;
    double real(std::string_view section, std::string_view key,
                std::optional<double> fallback = std::nullopt) const;
    std::optional<double> maybe_real(std::string_view section, std::string_view key) const;
    std::uint64_t integer(std::string_view section, std::string_view key,
                          std::optional<std::uint64_t> fallback = std::nullopt) const;
    std::vector<double> reals(std::string_view section, std::string_view key) const;
    std::vector<std::string> words(std::string_view section, std::string_view key) const;
    // Resolved path; `must_exist` raises ConfigError for a missing file.
    std::filesystem::path path(std::string_view section, std::string_view key,
                               bool must_exist = true) const;

    // Source location of a key, for error messages.
    std::string where(std::string_view section, std::string_view key) const;

    const std::filesystem::path& base_dir() const { return base_dir_; }

    // FNV-1a 64 over the canonical (sorted) key/value listing.
    std::uint64_t hash() const;

private:
    const Entry* find(std::string_view section, std::string_view key) const;
    void insert(const std::string& section, const std::string& key, Entry entry);

    std::filesystem::path base_dir_;
    std::vector<std::string> section_order_;
    std::map<std::string, std::map<std::string, Entry>, std::less<>> values_;
};

struct RunOptions {
    std::filesystem::path scenario;
    std::vector<std::string> overrides;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitCompute = 3;

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{
        "phasematch", "spectrum", "coupling", "budget", "coating",
        "optimize-coating", "simulate", "analyze", "sweep", "reproduce"};
    return names;
}

// Runs one subcommand and maps errors onto exit codes. Progress and the
// summary table go to `log`, errors to `err`.
int run(std::string_view subcommand, const RunOptions& options, std::ostream& log,
        std::ostream& err);

// Argument parsing front-end used by the executable.
int main(int argc, char** argv);

}  // namespace hsps::cli
