#include "xplat/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

#include <json.hpp>

namespace xplat::io {

namespace {

using nlohmann::json;

std::string where(const std::string& source, std::size_t line) { return source + ":" + std::to_string(line) + ": "; }

// Calls fn(line_number, line) for every non-blank line.
template <typename Fn>
void for_each_line(std::string_view text, Fn fn) {
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string line(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        fn(line_no, line);
    }
}

std::string trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return std::string(s.substr(a, b - a + 1));
}

template <typename T>
T field(const json& obj, const char* key, const std::string& at) {
    auto it = obj.find(key);
    if (it == obj.end()) throw InputError(at + "missing field \"" + key + "\"");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw InputError(at + "field \"" + key + "\" has the wrong type");
    }
}

double parse_number(const std::string& cell, const std::string& at) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw InputError(at + "not a number: \"" + cell + "\"");
    }
}

std::set<std::string> parse_list(const std::string& value) {
    std::set<std::string> out;
    std::stringstream ss(value);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (!item.empty()) out.insert(item);
    }
    return out;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::vector<redact::KeystrokeEvent> parse_keystrokes(std::string_view jsonl, const std::string& source) {
    std::vector<redact::KeystrokeEvent> out;
    for_each_line(jsonl, [&](std::size_t n, const std::string& line) {
        const auto at = where(source, n);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw InputError(at + "invalid JSON (" + e.what() + ")");
        }
        if (!obj.is_object()) throw InputError(at + "expected an object");
        redact::KeystrokeEvent e;
        e.user_id = field<std::string>(obj, "user_id", at);
        e.timestamp = field<std::int64_t>(obj, "timestamp", at);
        e.app_id = field<std::string>(obj, "app_id", at);
        e.current_text = field<std::string>(obj, "current_text", at);
        e.is_password = obj.value("is_password", false);
        e.is_phone_field = obj.value("is_phone_field", false);
        out.push_back(std::move(e));
    });
    return out;
}

std::vector<Document> parse_corpus(std::string_view jsonl, const std::string& source) {
    std::vector<Document> out;
    for_each_line(jsonl, [&](std::size_t n, const std::string& line) {
        const auto at = where(source, n);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw InputError(at + "invalid JSON (" + e.what() + ")");
        }
        if (!obj.is_object()) throw InputError(at + "expected an object");
        Document d;
        d.user_id = field<std::string>(obj, "user_id", at);
        try {
            d.platform = features::parse_platform(field<std::string>(obj, "platform", at));
        } catch (const std::invalid_argument& e) {
            throw InputError(at + e.what());
        }
        d.text = field<std::string>(obj, "text", at);
        out.push_back(std::move(d));
    });
    return out;
}

std::string corpus_jsonl(const std::vector<Document>& docs) {
    std::string out;
    for (const auto& d : docs) {
        nlohmann::ordered_json obj = {
            {"user_id", d.user_id}, {"platform", features::platform_name(d.platform)}, {"text", d.text}};
        out += obj.dump() + "\n";
    }
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                out.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else {
            out.back() += c;
        }
    }
    return out;
}

std::string csv_field(std::string_view value) {
    if (value.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(value);
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

OutcomeTable parse_outcomes(std::string_view csv, const std::string& source) {
    OutcomeTable t;
    bool header = false;
    std::size_t id_col = 0;
    for_each_line(csv, [&](std::size_t n, const std::string& line) {
        const auto at = where(source, n);
        auto cells = split_csv(line);
        for (auto& c : cells) c = trim(c);
        if (!header) {
            auto it = std::find(cells.begin(), cells.end(), "user_id");
            if (it == cells.end()) throw InputError(at + "no user_id column");
            id_col = static_cast<std::size_t>(it - cells.begin());
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i != id_col) t.columns.push_back(cells[i]);
            }
            header = true;
            return;
        }
        if (cells.size() != t.columns.size() + 1) throw InputError(at + "wrong number of fields");
        std::vector<double> values;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i == id_col) continue;
            values.push_back(cells[i].empty() ? std::numeric_limits<double>::quiet_NaN() : parse_number(cells[i], at));
        }
        if (!t.rows.emplace(cells[id_col], std::move(values)).second) {
            throw InputError(at + "duplicate user " + cells[id_col]);
        }
    });
    if (!header) throw InputError(source + ": empty outcomes file");
    return t;
}

EmbeddingTable parse_embeddings(std::string_view csv, const std::string& source) {
    EmbeddingTable t;
    bool header = false;
    std::size_t width = 0;
    for_each_line(csv, [&](std::size_t n, const std::string& line) {
        const auto at = where(source, n);
        auto cells = split_csv(line);
        for (auto& c : cells) c = trim(c);
        if (!header) {
            if (cells.size() < 3 || cells[0] != "user_id" || cells[1] != "platform") {
                throw InputError(at + "header must start with user_id,platform");
            }
            width = cells.size() - 2;
            header = true;
            return;
        }
        if (cells.size() != width + 2) throw InputError(at + "wrong number of fields");
        features::Platform p;
        try {
            p = features::parse_platform(cells[1]);
        } catch (const std::invalid_argument& e) {
            throw InputError(at + e.what());
        }
        std::vector<double> v;
        for (std::size_t i = 2; i < cells.size(); ++i) v.push_back(parse_number(cells[i], at));
        if (!t.emplace(std::pair{cells[0], p}, std::move(v)).second) {
            throw InputError(at + "duplicate row for " + cells[0]);
        }
    });
    if (!header) throw InputError(source + ": empty embeddings file");
    return t;
}

// ---------------------------------------------------------------------------

void set_config_value(RunConfig& c, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir) {
    auto path = [&] {
        std::filesystem::path p(value);
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };
    auto number = [&] { return parse_number(value, "config key " + key + ": "); };
    auto count = [&] {
        const double v = number();
        if (v < 0 || v != std::floor(v)) throw InputError("config key " + key + ": expected a non-negative integer");
        return static_cast<std::uint64_t>(v);
    };
    auto boolean = [&] {
        if (value == "true") return true;
        if (value == "false") return false;
        throw InputError("config key " + key + ": expected true or false");
    };
    if (key == "keystrokes") c.keystrokes = path();
    else if (key == "facebook") c.facebook = path();
    else if (key == "outcomes") c.outcomes = path();
    else if (key == "dictionary") c.dictionary = path();
    else if (key == "lexica") c.lexica = path();
    else if (key == "embeddings") c.embeddings = path();
    else if (key == "output_dir") c.output_dir = path();
    else if (key == "seed") c.seed = count();
    else if (key == "fdr_alpha" || key == "alpha") c.fdr_alpha = number();
    else if (key == "min_words") c.min_words = count();
    else if (key == "min_user_fraction") c.min_user_fraction = number();
    else if (key == "ridge_alpha") c.ridge_alpha = number();
    else if (key == "bootstrap_iterations") c.bootstrap_iterations = count();
    else if (key == "allowed_apps") c.allowed_apps = parse_list(value);
    else if (key == "inactivity_timeout_ms") c.inactivity_timeout_ms = static_cast<std::int64_t>(count());
    else if (key == "redact_facebook") c.redact_facebook = boolean();
    else if (key == "binary_outcomes") c.binary_outcomes = parse_list(value);
    else if (key == "model_features") c.model_features = value;
    else if (key == "cross_mode") c.cross_mode = value;
    else if (key == "nmf_k") c.nmf_k = static_cast<int>(count());
    else if (key == "nmf_iterations") c.nmf_iterations = static_cast<int>(count());
    else throw InputError("unknown config key \"" + key + "\"");
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    RunConfig c;
    for_each_line(text, [&](std::size_t n, const std::string& raw) {
        std::string line = raw;
        // strip a comment that is not inside quotes
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) return;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError(where("config", n) + "expected key = value");
        const auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        try {
            set_config_value(c, key, value, base_dir);
        } catch (const InputError& e) {
            throw InputError(where("config", n) + e.what());
        }
    });
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_file(path), path.parent_path());
}

void RunConfig::validate() const {
    if (!(fdr_alpha > 0 && fdr_alpha < 1)) throw InputError("fdr_alpha must lie in (0, 1)");
    if (!(min_user_fraction >= 0 && min_user_fraction <= 1)) throw InputError("min_user_fraction must lie in [0, 1]");
    if (!(ridge_alpha > 0)) throw InputError("ridge_alpha must be positive");
    if (model_features != "ngrams" && model_features != "embeddings") {
        throw InputError("model_features must be ngrams or embeddings");
    }
    if (cross_mode != "leave_one_out" && cross_mode != "full_source") {
        throw InputError("cross_mode must be leave_one_out or full_source");
    }
    if (model_features == "embeddings" && embeddings.empty()) {
        throw InputError("model_features = embeddings needs an embeddings file");
    }
    if (nmf_k < 1) throw InputError("nmf_k must be positive");
    for (const auto* p : {&keystrokes, &facebook, &outcomes, &dictionary, &lexica, &embeddings}) {
        if (!p->empty() && !std::filesystem::exists(*p)) throw InputError("input file not found: " + p->string());
    }
}

}  // namespace xplat::io
