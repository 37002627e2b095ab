// Copyright 2026 The pemsurv Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pemsurv/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "pemsurv/error.hpp"

namespace pemsurv {

namespace {

class ValueParser {
public:
    ValueParser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

    nlohmann::json parse() {
        auto v = value();
        skip_space();
        if (pos_ != s_.size()) fail("trailing characters after value");
        return v;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw SchemaError("config line " + std::to_string(line_) + ": " + what);
    }

    void skip_space() {
        while (pos_ < s_.size()) {
            if (std::isspace(static_cast<unsigned char>(s_[pos_]))) {
                ++pos_;
            } else if (s_[pos_] == '#') {
                while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    nlohmann::json value() {
        skip_space();
        if (pos_ >= s_.size()) fail("missing value");
        const char c = s_[pos_];
        if (c == '"') return basic_string();
        if (c == '\'') return literal_string();
        if (c == '[') return array();
        if (c == '{') fail("inline tables are not supported");
        return scalar();
    }

    std::string basic_string() {
        ++pos_;
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size()) break;
                const char e = s_[pos_++];
                switch (e) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default: fail(std::string("unsupported escape \\") + e);
                }
            }
            out.push_back(c);
        }
        if (pos_ >= s_.size()) fail("unterminated string");
        ++pos_;
        return out;
    }

    std::string literal_string() {
        const std::size_t end = s_.find('\'', pos_ + 1);
        if (end == std::string_view::npos) fail("unterminated string");
        std::string out(s_.substr(pos_ + 1, end - pos_ - 1));
        pos_ = end + 1;
        return out;
    }

    nlohmann::json array() {
        ++pos_;
        auto arr = nlohmann::json::array();
        for (;;) {
            skip_space();
            if (pos_ < s_.size() && s_[pos_] == ']') {
                ++pos_;
                return arr;
            }
            arr.push_back(value());
            skip_space();
            if (pos_ < s_.size() && s_[pos_] == ',') {
                ++pos_;
            } else if (pos_ < s_.size() && s_[pos_] == ']') {
                ++pos_;
                return arr;
            } else {
                fail("expected ',' or ']' in array");
            }
        }
    }

    nlohmann::json scalar() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '#' &&
               !std::isspace(static_cast<unsigned char>(s_[pos_])))
            ++pos_;
        std::string tok(s_.substr(start, pos_ - start));
        if (tok == "true") return true;
        if (tok == "false") return false;
        if (tok == "inf" || tok == "+inf") return std::numeric_limits<double>::infinity();
        if (tok == "-inf") return -std::numeric_limits<double>::infinity();
        std::string digits;
        for (char c : tok)
            if (c != '_') digits.push_back(c);
        const char* b = digits.data();
        const char* e = b + digits.size();
        if (!digits.empty() && digits[0] == '+') ++b;
        const bool is_float = digits.find_first_of(".eE") != std::string::npos;
        if (!is_float) {
            long long v = 0;
            auto [p, ec] = std::from_chars(b, e, v);
            if (ec == std::errc() && p == e) return v;
        } else {
            double v = 0.0;
            auto [p, ec] = std::from_chars(b, e, v);
            if (ec == std::errc() && p == e) return v;
        }
        fail("cannot parse value '" + tok + "'");
    }

    std::string_view s_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_key(const std::string& key, std::size_t line) {
    std::vector<std::string> parts;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, '.')) {
        part = trim(part);
        if (part.size() >= 2 && (part.front() == '"' || part.front() == '\'') && part.back() == part.front())
            part = part.substr(1, part.size() - 2);
        if (part.empty()) throw SchemaError("config line " + std::to_string(line) + ": empty key");
        parts.push_back(part);
    }
    if (parts.empty()) throw SchemaError("config line " + std::to_string(line) + ": empty key");
    return parts;
}

// Bracket depth of `text` outside strings and comments.
int bracket_balance(std::string_view text) {
    int depth = 0;
    char quote = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quote) {
            if (c == '\\' && quote == '"') ++i;
            else if (c == quote) quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '#') {
            while (i < text.size() && text[i] != '\n') ++i;
        } else if (c == '[') {
            ++depth;
        } else if (c == ']') {
            --depth;
        }
    }
    return depth;
}

}  // namespace

nlohmann::json parse_toml(std::istream& in) {
    auto root = nlohmann::json::object();
    nlohmann::json* table = &root;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t[0] == '[') {
            const auto close = t.find(']');
            if (t.rfind("[[", 0) == 0 || close == std::string::npos)
                throw SchemaError("config line " + std::to_string(line_no) + ": unsupported table header");
            table = &root;
            for (const auto& part : split_key(t.substr(1, close - 1), line_no)) {
                auto& next = (*table)[part];
                if (next.is_null()) next = nlohmann::json::object();
                if (!next.is_object())
                    throw SchemaError("config line " + std::to_string(line_no) + ": '" + part + "' is not a table");
                table = &next;
            }
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw SchemaError("config line " + std::to_string(line_no) + ": expected key = value");
        const auto keys = split_key(t.substr(0, eq), line_no);
        std::string text = t.substr(eq + 1);
        const std::size_t first_line = line_no;
        while (bracket_balance(text) > 0 && std::getline(in, line)) {
            ++line_no;
            text += "\n" + line;
        }
        nlohmann::json* target = table;
        for (std::size_t k = 0; k + 1 < keys.size(); ++k) {
            auto& next = (*target)[keys[k]];
            if (next.is_null()) next = nlohmann::json::object();
            target = &next;
        }
        if (target->contains(keys.back()))
            throw SchemaError("config line " + std::to_string(first_line) + ": duplicate key '" + keys.back() + "'");
        (*target)[keys.back()] = ValueParser(text, first_line).parse();
    }
    return root;
}

nlohmann::json parse_toml(const std::string& text) {
    std::istringstream in(text);
    return parse_toml(in);
}

nlohmann::json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        try {
            return nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("invalid JSON in '" + path + "': " + e.what());
        }
    }
    return parse_toml(in);
}

}  // namespace pemsurv
