#include "crashsamp/kv_file.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "crashsamp/types.hpp"

namespace crashsamp {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) throw ConfigError("not a number: '" + s + "'");
    return v;
}

KvFile KvFile::parse(std::istream& in) {
    KvFile kv;
    std::string section;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (kv.has(section, key)) throw ConfigError("duplicate key '" + key + "' in [" + section + "]");
        kv.set(section, key, trim(line.substr(eq + 1)));
    }
    return kv;
}

KvFile KvFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse(in);
}

bool KvFile::has_section(const std::string& section) const { return sections_.count(section) != 0; }

bool KvFile::has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return false;
    return std::any_of(it->second.begin(), it->second.end(), [&](const auto& p) { return p.first == key; });
}

const std::string& KvFile::raw(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it != sections_.end()) {
        for (const auto& [k, v] : it->second) {
            if (k == key) return v;
        }
    }
    throw ConfigError("missing key '" + key + "' in [" + section + "]");
}

double KvFile::get_double(const std::string& section, const std::string& key) const {
    return parse_double(raw(section, key));
}

std::uint64_t KvFile::get_uint(const std::string& section, const std::string& key) const {
    const std::string& s = raw(section, key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ConfigError("key '" + key + "': not a non-negative integer: '" + s + "'");
    }
    return v;
}

bool KvFile::get_bool(const std::string& section, const std::string& key) const {
    const std::string& s = raw(section, key);
    if (s == "true" || s == "on" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "off" || s == "0" || s == "no") return false;
    throw ConfigError("key '" + key + "': not a boolean: '" + s + "'");
}

std::vector<double> KvFile::get_doubles(const std::string& section, const std::string& key) const {
    std::istringstream in(raw(section, key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_double(tok));
    return out;
}

void KvFile::set(const std::string& section, const std::string& key, std::string value) {
    if (!sections_.count(section)) section_order_.push_back(section);
    auto& entries = sections_[section];
    for (auto& [k, v] : entries) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    entries.emplace_back(key, std::move(value));
}

void KvFile::set_double(const std::string& section, const std::string& key, double v) {
    set(section, key, format_double(v));
}

void KvFile::set_uint(const std::string& section, const std::string& key, std::uint64_t v) {
    set(section, key, std::to_string(v));
}

void KvFile::set_bool(const std::string& section, const std::string& key, bool v) {
    set(section, key, v ? "true" : "false");
}

void KvFile::set_doubles(const std::string& section, const std::string& key, std::span<const double> v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ' ';
        s += format_double(v[i]);
    }
    set(section, key, std::move(s));
}

void KvFile::require_known(const std::string& section, const std::set<std::string>& allowed) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return;
    for (const auto& [k, v] : it->second) {
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in [" + section + "]");
    }
}

void KvFile::write(std::ostream& out) const {
    bool first = true;
    for (const auto& name : section_order_) {
        if (!first) out << '\n';
        first = false;
        if (!name.empty()) out << '[' << name << "]\n";
        for (const auto& [k, v] : sections_.at(name)) out << k << " = " << v << '\n';
    }
}

void KvFile::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    write(out);
}

}  // namespace crashsamp
