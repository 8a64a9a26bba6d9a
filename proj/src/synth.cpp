#include "xplat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace xplat::synth {

namespace {

const std::vector<std::string> kFiller = {
    "hey",  "are",   "you",   "coming", "tonight", "ok",     "see",   "soon",  "thanks", "call",
    "me",   "later", "love",  "this",   "weekend", "fun",    "yes",   "maybe", "work",   "home",
    "text", "when",  "there", "dinner", "sounds",  "good",   "need",  "the",   "kids",   "school",
};

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

bool chance(std::mt19937_64& rng, double p) { return uniform(rng) < p; }

// Box-Muller on the portable uniform draw.
double normal(std::mt19937_64& rng) {
    const double u1 = std::max(uniform(rng), 1e-300);
    const double u2 = uniform(rng);
    return std::sqrt(-2 * std::log(u1)) * std::cos(2 * M_PI * u2);
}

std::string digits(std::mt19937_64& rng, int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += static_cast<char>('0' + pick(rng, 10));
    return s;
}

std::string misspell(std::mt19937_64& rng, const std::string& word) {
    std::string w = word;
    if (w.size() >= 2) {
        auto i = pick(rng, w.size() - 1);
        std::swap(w[i], w[i + 1]);
    }
    if (w == word) w += word.back();
    return w;
}

}  // namespace

std::string random_pii(std::mt19937_64& rng) {
    switch (pick(rng, 6)) {
        case 0: return "(" + digits(rng, 3) + ") " + digits(rng, 3) + "-" + digits(rng, 4);
        case 1: return digits(rng, 3) + "-" + digits(rng, 3) + "-" + digits(rng, 4);
        case 2: return digits(rng, 3) + "-" + digits(rng, 4);
        case 3: return digits(rng, 3) + "-" + digits(rng, 2) + "-" + digits(rng, 4);
        case 4: {
            static const std::vector<std::string> names = {"jdoe", "amy", "kbrown", "zed"};
            static const std::vector<std::string> hosts = {"mail.com", "example.org", "uni.edu"};
            return names[pick(rng, names.size())] + digits(rng, 2) + "@" + hosts[pick(rng, hosts.size())];
        }
        default: return digits(rng, 10);
    }
}

TypedEntry type_entry(std::mt19937_64& rng, const std::vector<std::string>& words, const std::vector<bool>& is_pii,
                      const std::string& user, const std::string& app, std::int64_t t0, const SimOptions& options) {
    TypedEntry out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out.target += ' ';
        out.target += words[i];
        if (i < is_pii.size() && is_pii[i]) out.pii.push_back(words[i]);
    }

    std::int64_t t = t0;
    auto emit = [&](const std::string& text) {
        t += 50 + static_cast<std::int64_t>(pick(rng, 350));
        out.events.push_back({user, t, app, text, false, false});
        if (!text.empty()) out.raw_snapshots.push_back(text);
    };

    std::string cur;
    while (cur != out.target) {
        const auto common = redact::common_prefix(cur, out.target);
        if (common < cur.size()) {
            cur.pop_back();
            if (!cur.empty()) emit(cur);  // an empty field would end the entry
            continue;
        }
        // at a word start: maybe type a misspelling that autocorrect then fixes
        const bool word_start = cur.empty() || cur.back() == ' ';
        if (word_start && chance(rng, options.autocorrect_rate)) {
            auto end = out.target.find(' ', cur.size());
            if (end == std::string::npos) end = out.target.size();
            const auto word = out.target.substr(cur.size(), end - cur.size());
            if (std::all_of(word.begin(), word.end(), [](char c) { return c >= 'a' && c <= 'z'; })) {
                const auto typo = misspell(rng, word);
                const auto base = cur;
                for (std::size_t i = 1; i <= typo.size(); ++i) emit(base + typo.substr(0, i));
                cur = base + word + (end < out.target.size() ? " " : "");
                emit(cur);
                continue;
            }
        }
        if (!cur.empty() && chance(rng, options.backspace_burst_rate)) {
            auto k = 1 + pick(rng, std::min<std::size_t>(4, cur.size()));
            for (std::size_t i = 0; i < k; ++i) {
                cur.pop_back();
                if (!cur.empty()) emit(cur);
            }
            continue;
        }
        if (chance(rng, options.typo_rate)) {
            const std::string pool = "abcdefghijklmnopqrstuvwxyz0123456789";
            cur += pool[pick(rng, pool.size())];
            emit(cur);
            continue;
        }
        cur += out.target[cur.size()];
        emit(cur);
    }
    emit("");
    return out;
}

TypedEntry simulate_entry(std::mt19937_64& rng, const std::string& user, const std::string& app, std::int64_t t0,
                          const SimOptions& options) {
    const int n_words = options.min_words + static_cast<int>(pick(rng, options.max_words - options.min_words + 1));
    const int n_pii = options.min_pii + static_cast<int>(pick(rng, options.max_pii - options.min_pii + 1));
    std::vector<std::string> pieces;
    for (int i = 0; i < n_words; ++i) pieces.push_back(kFiller[pick(rng, kFiller.size())]);
    std::vector<bool> is_pii(pieces.size(), false);
    for (int i = 0; i < n_pii; ++i) {
        auto at = pick(rng, pieces.size() + 1);
        pieces.insert(pieces.begin() + static_cast<std::ptrdiff_t>(at), random_pii(rng));
        is_pii.insert(is_pii.begin() + static_cast<std::ptrdiff_t>(at), true);
    }
    return type_entry(rng, pieces, is_pii, user, app, t0, options);
}

// ---------------------------------------------------------------------------
// Fixture

namespace {

const std::vector<std::string> kCommon = {
    "i",    "you",  "the",  "a",     "to",   "and",  "is",    "are",  "was",  "have",  "will",  "can",
    "do",   "it",   "so",   "just",  "get",  "go",   "really", "good", "time", "today", "now",   "day",
    "know", "what", "that", "think", "want", "my",   "we",    "not",  "too",  "back",  "going", "been",
};
const std::vector<std::string> kFacebookOnly = {"weekend", "friends", "fun",   "party",   "photos",
                                                "birthday", "game",   "happy", "awesome", "amazing"};
const std::vector<std::string> kSmsOnly = {"ok",    "home",  "omw", "lol", "where", "u", "gonna",
                                           "pick",  "could", "would", "should", "did", "does", "must"};

// Words whose rate rises with an outcome (+) or falls with it (-).
struct Marker {
    std::string outcome;
    std::vector<std::string> high;
    std::vector<std::string> low;
};
const std::vector<Marker> kMarkers = {
    {"age", {"work", "kids", "family", "meeting"}, {"school", "class", "exam", "dorm"}},
    {"depression", {"tired", "sad", "alone", "sorry"}, {"great", "excited", "yay", "glad"}},
    {"life_satisfaction", {"blessed", "grateful", "love", "proud"}, {"ugh", "hate", "worst", "annoyed"}},
};

struct Person {
    std::string id;
    double age = 0;
    int gender = 0;  // 1 / 0
    double depression = 0, stress = 0, life_satisfaction = 0;
    double z[3] = {0, 0, 0};  // standardised age, depression, life satisfaction
};

std::string sentence(std::mt19937_64& rng, const Person& p, bool facebook, int words) {
    std::string out;
    for (int w = 0; w < words; ++w) {
        std::string word;
        const double u = uniform(rng);
        if (u < 0.16) {
            const auto& pool = facebook ? kFacebookOnly : kSmsOnly;
            word = pool[pick(rng, pool.size())];
        } else if (u < 0.40) {
            const auto m = pick(rng, kMarkers.size());
            // the outcome signal is stronger on Facebook
            const double strength = facebook ? 1.6 : 0.8;
            const double p_high = 1.0 / (1.0 + std::exp(-strength * p.z[m]));
            const auto& pool = uniform(rng) < p_high ? kMarkers[m].high : kMarkers[m].low;
            word = pool[pick(rng, pool.size())];
        } else {
            word = kCommon[pick(rng, kCommon.size())];
        }
        if (!out.empty()) out += ' ';
        out += word;
    }
    return out;
}

std::string fmt(double v, int precision = 6) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
}

}  // namespace

Fixture make_fixture(const FixtureOptions& options) {
    std::mt19937_64 rng(options.seed);
    std::vector<Person> people;
    for (int u = 0; u < options.users; ++u) {
        Person p;
        std::ostringstream id;
        id << "u" << std::setw(2) << std::setfill('0') << (u + 1);
        p.id = id.str();
        p.z[0] = normal(rng);
        p.z[1] = normal(rng);
        p.z[2] = -0.5 * p.z[1] + std::sqrt(0.75) * normal(rng);
        p.age = std::round((35 + 10 * p.z[0]) * 10) / 10;
        p.gender = chance(rng, 0.5) ? 1 : 0;
        p.depression = std::round((10 + 5 * p.z[1]) * 10) / 10;
        p.stress = std::round((16 + 4 * (0.6 * p.z[1] + 0.8 * normal(rng))) * 10) / 10;
        p.life_satisfaction = std::round((6 + 1.5 * p.z[2]) * 10) / 10;
        people.push_back(p);
    }

    const std::string messaging = "com.google.android.apps.messaging";
    std::string keystrokes, facebook, embeddings;
    nlohmann::ordered_json line;
    for (std::size_t u = 0; u < people.size(); ++u) {
        const auto& p = people[u];
        // the last user writes too little to be analysed
        const bool sparse = u + 1 == people.size() && people.size() > 3;
        const int posts = sparse ? options.facebook_posts / 10 : options.facebook_posts;
        const int entries = sparse ? options.sms_entries / 10 : options.sms_entries;

        for (int k = 0; k < posts; ++k) {
            line = {{"user_id", p.id}, {"platform", "facebook"},
                    {"text", sentence(rng, p, true, 5 + static_cast<int>(pick(rng, 7)))}};
            if (chance(rng, 0.1)) line["text"] = line["text"].get<std::string>() + " :)";
            facebook += line.dump() + "\n";
        }

        std::int64_t t = 1'700'000'000'000 + static_cast<std::int64_t>(u) * 100'000'000;
        auto push = [&](const redact::KeystrokeEvent& e) {
            line = {{"user_id", e.user_id},         {"timestamp", e.timestamp},
                    {"app_id", e.app_id},           {"current_text", e.current_text},
                    {"is_password", e.is_password}, {"is_phone_field", e.is_phone_field}};
            keystrokes += line.dump() + "\n";
        };
        SimOptions sim;
        sim.min_pii = 0;
        for (int k = 0; k < entries; ++k) {
            auto text = sentence(rng, p, false, 3 + static_cast<int>(pick(rng, 6)));
            std::vector<std::string> words;
            std::istringstream ws(text);
            for (std::string w; ws >> w;) words.push_back(w);
            std::vector<bool> is_pii(words.size(), false);
            if (chance(rng, 0.2)) {
                auto at = pick(rng, words.size() + 1);
                words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), random_pii(rng));
                is_pii.insert(is_pii.begin() + static_cast<std::ptrdiff_t>(at), true);
            }
            auto typed = type_entry(rng, words, is_pii, p.id, messaging, t, sim);
            for (const auto& e : typed.events) push(e);
            t = typed.events.back().timestamp + 120'000;
        }
        // a password field and another app, both kept out of the corpus
        for (const char* s : {"h", "hu", "hun", "hunt", "hunte", "hunter", "hunter2", ""}) {
            push({p.id, t += 150, messaging, s, true, false});
        }
        for (const char* s : {"s", "se", "sec", "secr", "secre", "secret", ""}) {
            push({p.id, t += 150, "com.whatsapp", s, false, false});
        }

        for (const char* platform : {"facebook", "sms"}) {
            const bool fb = platform[0] == 'f';
            embeddings += p.id + "," + platform;
            std::mt19937_64 erng(options.seed ^ (0x9E3779B97F4A7C15ULL * (u + 1)) ^ (fb ? 0 : 0xABCDEF));
            for (int j = 0; j < options.embedding_dim; ++j) {
                const int m = j % 3;
                const double load = (fb ? 0.9 : 0.5) * ((j / 3) % 2 ? 1.0 : -1.0);
                const double v = 1.5 + load * p.z[m] + (fb ? 0.2 : -0.2) * ((j % 5) - 2) + 0.6 * normal(erng);
                embeddings += "," + fmt(v);
            }
            embeddings += "\n";
        }
    }

    std::string emb_header = "user_id,platform";
    for (int j = 0; j < options.embedding_dim; ++j) emb_header += ",e" + std::to_string(j);

    std::string outcomes = "user_id,age,gender,depression,stress,life_satisfaction\n";
    for (const auto& p : people) {
        outcomes += p.id + "," + fmt(p.age, 1) + "," + std::to_string(p.gender) + "," + fmt(p.depression, 1) + "," +
                    fmt(p.stress, 1) + "," + fmt(p.life_satisfaction, 1) + "\n";
    }

    const std::string dictionary =
        "# category word lists for the synthetic fixture\n"
        "[leisure]\nweekend\nfun\nparty\ngame*\nbirthday\nphotos\n"
        "[auxiliary verbs]\nis\nare\nwas\nhave\nwill\ncan\ndo\nbeen\ncould\nwould\nshould\ndid\ndoes\nmust\n"
        "[assent]\nok\nyeah\nyes\nsure\nk\n"
        "[negative emotion]\nsad\ntired\nalone\nhate\nugh\nworst\nannoy*\n"
        "[work]\nwork*\nmeeting\nschool\nclass\nexam\n";

    std::string lexica = "term,category,weight\n";
    const double intercepts[3] = {35, 10, 6};
    const double scale[3] = {120, 60, 18};
    for (std::size_t m = 0; m < kMarkers.size(); ++m) {
        lexica += "_intercept," + kMarkers[m].outcome + "," + fmt(intercepts[m], 1) + "\n";
        for (const auto& w : kMarkers[m].high) lexica += w + "," + kMarkers[m].outcome + "," + fmt(scale[m], 1) + "\n";
        for (const auto& w : kMarkers[m].low) lexica += w + "," + kMarkers[m].outcome + "," + fmt(-scale[m], 1) + "\n";
    }

    const std::string config =
        "# synthetic fixture run\n"
        "keystrokes = \"keystrokes.jsonl\"\n"
        "facebook = \"facebook.jsonl\"\n"
        "outcomes = \"outcomes.csv\"\n"
        "dictionary = \"dictionary.txt\"\n"
        "lexica = \"lexica.csv\"\n"
        "embeddings = \"embeddings.csv\"\n"
        "output_dir = \"out\"\n"
        "allowed_apps = \"" + messaging + "\"\n"
        "binary_outcomes = \"gender\"\n"
        "model_features = \"embeddings\"\n"
        "nmf_k = 8\n"
        "nmf_iterations = 300\n"
        "seed = 7\n"
        "bootstrap_iterations = 10000\n"
        "min_words = 500\n"
        "fdr_alpha = 0.05\n";

    Fixture f;
    f.files = {{"keystrokes.jsonl", keystrokes},          {"facebook.jsonl", facebook},
               {"outcomes.csv", outcomes},                {"dictionary.txt", dictionary},
               {"lexica.csv", lexica},                    {"embeddings.csv", emb_header + "\n" + embeddings},
               {"config.toml", config}};
    return f;
}

void write_fixture(const Fixture& fixture, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : fixture.files) {
        std::ofstream out(dir / name, std::ios::binary);
        out << content;
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    }
}

}  // namespace xplat::synth
