#pragma once

// Minimal sectioned key-value format used for every config file:
//
//   # comment
//   [grid]
//   n_events = 44
//   oeoff_levels = 0 0.1 0.2
//
// Arrays are whitespace-separated. Doubles are written in shortest
// round-trip form, so save -> load reproduces every value bit for bit.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace crashsamp {

std::string format_double(double v);
double parse_double(const std::string& s);

class KvFile {
public:
    static KvFile parse(std::istream& in);
    static KvFile load(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;
    const std::string& raw(const std::string& section, const std::string& key) const;

    double get_double(const std::string& section, const std::string& key) const;
    std::uint64_t get_uint(const std::string& section, const std::string& key) const;
    bool get_bool(const std::string& section, const std::string& key) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key) const;

    void set(const std::string& section, const std::string& key, std::string value);
    void set_double(const std::string& section, const std::string& key, double v);
    void set_uint(const std::string& section, const std::string& key, std::uint64_t v);
    void set_bool(const std::string& section, const std::string& key, bool v);
    void set_doubles(const std::string& section, const std::string& key, std::span<const double> v);

    /// Throws ConfigError for keys of `section` outside `allowed`.
    void require_known(const std::string& section, const std::set<std::string>& allowed) const;
    bool has_section(const std::string& section) const;

    void write(std::ostream& out) const;
    void save(const std::string& path) const;

private:
    // section -> ordered (key, value); insertion order kept for stable output.
    std::vector<std::string> section_order_;
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections_;
};

}  // namespace crashsamp
