// SPDX-License-Identifier: Apache-2.0
//
// crsopt - precoder and time-resource optimization for the two-user
// cooperative rate-splitting downlink
// Copyright (C) 2026 the crsopt authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace crsopt {

// Flat key-value text format used for scenario files and experiment configs.
// One "key = value" pair per line; '#' starts a comment; blank lines are
// ignored. Keys are restricted to [A-Za-z0-9_.-]. Duplicate keys are
// rejected. Values keep their raw text; typed getters parse on demand.
// Keys are stored sorted, so serialize() is canonical and hashable.
class KvFile
{
  public:
    KvFile() = default;

    static KvFile parse_string(std::string_view text)
    {
        KvFile kv;
        std::size_t pos = 0, line_no = 0;
        while (pos <= text.size())
        {
            std::size_t eol = text.find('\n', pos);
            if (eol == std::string_view::npos)
                eol = text.size();
            std::string_view line = text.substr(pos, eol - pos);
            pos = eol + 1;
            ++line_no;

            if (std::size_t hash = line.find('#'); hash != std::string_view::npos)
                line = line.substr(0, hash);
            line = trim(line);
            if (line.empty())
                continue;

            std::size_t eq = line.find('=');
            if (eq == std::string_view::npos)
                throw std::invalid_argument("kv line " + std::to_string(line_no) + ": missing '='");
            std::string key(trim(line.substr(0, eq)));
            std::string val(trim(line.substr(eq + 1)));
            if (key.empty() || !valid_key(key))
                throw std::invalid_argument("kv line " + std::to_string(line_no) + ": bad key '" + key + "'");
            if (kv.entries_.count(key))
                throw std::invalid_argument("kv line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
            kv.entries_.emplace(std::move(key), std::move(val));
        }
        return kv;
    }

    static KvFile load(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw std::invalid_argument("cannot open kv file '" + path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_string(buf.str());
    }

    bool has(const std::string &key) const { return entries_.count(key) != 0; }

    const std::string &raw(const std::string &key) const
    {
        auto it = entries_.find(key);
        if (it == entries_.end())
            throw std::invalid_argument("missing kv key '" + key + "'");
        return it->second;
    }

    std::string get_string(const std::string &key) const { return raw(key); }
    std::string get_string(const std::string &key, const std::string &fallback) const
    {
        return has(key) ? raw(key) : fallback;
    }

    double get_double(const std::string &key) const { return parse_double(raw(key), key); }
    double get_double(const std::string &key, double fallback) const
    {
        return has(key) ? get_double(key) : fallback;
    }

    long long get_int(const std::string &key) const
    {
        const std::string &s = raw(key);
        char *end = nullptr;
        long long v = std::strtoll(s.c_str(), &end, 10);
        if (end == s.c_str() || *end != '\0')
            throw std::invalid_argument("kv key '" + key + "': not an integer: '" + s + "'");
        return v;
    }
    long long get_int(const std::string &key, long long fallback) const
    {
        return has(key) ? get_int(key) : fallback;
    }

    std::uint64_t get_u64(const std::string &key) const
    {
        const std::string &s = raw(key);
        char *end = nullptr;
        unsigned long long v = std::strtoull(s.c_str(), &end, 10);
        if (end == s.c_str() || *end != '\0')
            throw std::invalid_argument("kv key '" + key + "': not an unsigned integer: '" + s + "'");
        return v;
    }
    std::uint64_t get_u64(const std::string &key, std::uint64_t fallback) const
    {
        return has(key) ? get_u64(key) : fallback;
    }

    std::vector<std::string> get_string_list(const std::string &key) const
    {
        std::vector<std::string> out;
        std::string_view s = raw(key);
        std::size_t pos = 0;
        while (pos <= s.size())
        {
            std::size_t comma = s.find(',', pos);
            if (comma == std::string_view::npos)
                comma = s.size();
            std::string item(trim(s.substr(pos, comma - pos)));
            if (!item.empty())
                out.push_back(std::move(item));
            pos = comma + 1;
        }
        return out;
    }

    std::vector<double> get_double_list(const std::string &key) const
    {
        std::vector<double> out;
        for (const auto &item : get_string_list(key))
            out.push_back(parse_double(item, key));
        return out;
    }

    void set(const std::string &key, std::string value)
    {
        if (key.empty() || !valid_key(key))
            throw std::invalid_argument("bad kv key '" + key + "'");
        entries_[key] = std::move(value);
    }

    void set_double(const std::string &key, double v) { set(key, format_double(v)); }

    void set_int(const std::string &key, long long v) { set(key, std::to_string(v)); }

    void set_u64(const std::string &key, std::uint64_t v) { set(key, std::to_string(v)); }

    // Canonical text: keys in sorted order, "key = value" per line.
    std::string serialize() const
    {
        std::string out;
        for (const auto &[k, v] : entries_)
        {
            out += k;
            out += " = ";
            out += v;
            out += '\n';
        }
        return out;
    }

    void save(const std::string &path) const
    {
        std::ofstream out(path);
        if (!out)
            throw std::invalid_argument("cannot write kv file '" + path + "'");
        out << serialize();
    }

    const std::map<std::string, std::string> &entries() const { return entries_; }

    // Shortest representation that round-trips a double through text.
    static std::string format_double(double v)
    {
        char buf[40];
        for (int prec = 15; prec <= 17; ++prec)
        {
            std::snprintf(buf, sizeof buf, "%.*g", prec, v);
            if (std::strtod(buf, nullptr) == v)
                break;
        }
        return buf;
    }

    static double parse_double(const std::string &s, const std::string &key)
    {
        char *end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0')
            throw std::invalid_argument("kv key '" + key + "': not a number: '" + s + "'");
        return v;
    }

  private:
    static std::string_view trim(std::string_view s)
    {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
            s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
            s.remove_suffix(1);
        return s;
    }

    static bool valid_key(std::string_view key)
    {
        for (char c : key)
        {
            bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '_' || c == '.' || c == '-';
            if (!ok)
                return false;
        }
        return true;
    }

    std::map<std::string, std::string> entries_;
};

// FNV-1a, 64 bit. Used for config and scenario fingerprints.
inline std::uint64_t fnv1a64(std::string_view s)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s)
    {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace crsopt
