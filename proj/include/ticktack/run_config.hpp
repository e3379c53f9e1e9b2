// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ticktack/alignment.hpp"
#include "ticktack/model.hpp"
#include "ticktack/synthetic.hpp"
#include "ticktack/temporal_geometry.hpp"

namespace ticktack {

enum class Provenance { Default, File, Env, Flag };
const char* to_string(Provenance p) noexcept;

enum class ValueKind { Integer, Real, Boolean, Text, Choice };

struct ConfigKey {
    std::string name;  // "section.key"
    ValueKind kind = ValueKind::Text;
    std::string default_value;
    std::string help;
    std::vector<std::string> choices;  // ValueKind::Choice only
};

/// Every recognized key, in the order they are serialized.
const std::vector<ConfigKey>& config_schema();

/// Resolved configuration. Each value remembers where it came from; a flag
/// beats the environment, which beats the config file, which beats the
/// built-in default.
class RunConfig {
public:
    RunConfig();

    /// Parses "[section]" headers and "key = value" lines; '#' and ';' start
    /// comments. Throws Error{InvalidConfig} naming the offending key or line.
    void merge_file(std::istream& in, const std::string& origin = "config");
    void load_file(const std::string& path);

    /// Throws Error{InvalidConfig} for unknown keys or values of the wrong kind.
    void set(const std::string& name, const std::string& value, Provenance source);

    [[nodiscard]] const std::string& get(const std::string& name) const;
    [[nodiscard]] long long get_int(const std::string& name) const;
    [[nodiscard]] double get_real(const std::string& name) const;
    [[nodiscard]] bool get_bool(const std::string& name) const;
    [[nodiscard]] Provenance provenance(const std::string& name) const;

    /// INI text that merge_file reads back to the same values; each line notes its source.
    void write(std::ostream& out) const;
    void save(const std::string& path) const;

    [[nodiscard]] ModelConfig model(int vocab_size) const;
    [[nodiscard]] EncodingConfig encoding() const;
    [[nodiscard]] TrainingConfig training() const;
    [[nodiscard]] TrainingConfig pretraining() const;
    [[nodiscard]] SuiteSpec suite() const;
    [[nodiscard]] int threads() const;

    /// Per-key documentation for --help.
    static std::string help_text();

private:
    struct Entry {
        std::string value;
        Provenance source = Provenance::Default;
    };
    std::map<std::string, Entry> values_;
};

}  // namespace ticktack
