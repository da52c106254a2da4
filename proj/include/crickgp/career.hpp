#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "crickgp/common.hpp"

namespace crickgp {

enum class Venue : int { Away = -1, Neutral = 0, Home = +1 };

/// Unknown encodes a missing team-innings value; it contributes a zero
/// exponent to the innings multiplier, the same baseline as a neutral venue.
enum class TeamInnings : int { Second = -1, Unknown = 0, First = +1 };

struct InningsRecord {
    int index = 0;  // 1-based career innings number
    int runs = 0;
    bool dismissed = true;  // false = not out (right-censored)
    Venue venue = Venue::Neutral;
    TeamInnings team_innings = TeamInnings::Unknown;

    bool operator==(const InningsRecord&) const = default;
};

struct CareerRecord {
    std::string player_id;
    std::vector<InningsRecord> innings;

    int length() const { return static_cast<int>(innings.size()); }
    bool operator==(const CareerRecord&) const = default;
};

inline void validate(const CareerRecord& career) {
    if (career.innings.empty()) throw DataError("career has no innings");
    int expected = 1;
    for (const auto& rec : career.innings) {
        if (rec.index != expected)
            throw DataError("innings indices must be contiguous from 1, got " +
                            std::to_string(rec.index) + " where " + std::to_string(expected) +
                            " was expected");
        if (rec.runs < 0) throw DataError("negative runs in innings " + std::to_string(rec.index));
        ++expected;
    }
}

/// Runs per dismissal over the whole career, the traditional batting average.
inline double career_average(const CareerRecord& career) {
    long total = 0;
    int dismissals = 0;
    for (const auto& rec : career.innings) {
        total += rec.runs;
        if (rec.dismissed) ++dismissals;
    }
    if (dismissals == 0)
        throw DataError("career average undefined: no dismissals for " + career.player_id);
    return static_cast<double>(total) / static_cast<double>(dismissals);
}

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline int parse_int(const std::string& tok, const char* what, int line_no) {
    std::size_t pos = 0;
    int value = 0;
    try {
        value = std::stoi(tok, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != tok.size() || tok.empty())
        throw ParseError(std::string("malformed ") + what + " '" + tok + "' at line " +
                         std::to_string(line_no));
    return value;
}

}  // namespace detail

/// Career files are CSV with header `innings,runs,out,venue,team_innings`
/// (the `innings` index column may be omitted, in which case rows are
/// numbered 1..T in file order). `#` lines are comments; a `# player: NAME`
/// comment sets the player id, otherwise `fallback_id` is used.
inline CareerRecord parse_career_stream(std::istream& in, const std::string& fallback_id,
                                        std::vector<std::string>* warnings = nullptr) {
    CareerRecord career;
    career.player_id = fallback_id;

    auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };

    std::string line;
    int line_no = 0;
    bool header_seen = false;
    bool has_index_column = true;
    int next_index = 1;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = detail::trim(line);
        if (stripped.empty()) continue;
        if (stripped.front() == '#') {
            const std::string tag = "# player:";
            if (stripped.rfind(tag, 0) == 0)
                career.player_id = detail::trim(stripped.substr(tag.size()));
            continue;
        }
        if (!header_seen) {
            const std::string h = detail::lower(stripped);
            if (h == "innings,runs,out,venue,team_innings") {
                has_index_column = true;
            } else if (h == "runs,out,venue,team_innings") {
                has_index_column = false;
            } else {
                throw ParseError("unrecognised header '" + stripped + "' at line " +
                                 std::to_string(line_no));
            }
            header_seen = true;
            continue;
        }

        auto fields = detail::split_csv(line);
        const std::size_t expected = has_index_column ? 5 : 4;
        if (fields.size() != expected)
            throw ParseError("expected " + std::to_string(expected) + " fields at line " +
                             std::to_string(line_no) + ", got " + std::to_string(fields.size()));

        InningsRecord rec;
        std::size_t f = 0;
        if (has_index_column) {
            rec.index = detail::parse_int(fields[f++], "innings index", line_no);
            if (rec.index != next_index)
                throw ParseError("non-contiguous innings index at line " + std::to_string(line_no));
        } else {
            rec.index = next_index;
        }
        ++next_index;

        rec.runs = detail::parse_int(fields[f++], "runs", line_no);
        if (rec.runs < 0)
            throw ParseError("negative runs at line " + std::to_string(line_no));

        const std::string out_tok = fields[f++];
        if (out_tok == "0") {
            rec.dismissed = false;
        } else if (out_tok == "1") {
            rec.dismissed = true;
        } else {
            throw ParseError("malformed out flag '" + out_tok + "' at line " +
                             std::to_string(line_no));
        }

        const std::string venue_tok = detail::lower(fields[f++]);
        if (venue_tok == "home") {
            rec.venue = Venue::Home;
        } else if (venue_tok == "away") {
            rec.venue = Venue::Away;
        } else if (venue_tok == "neutral") {
            rec.venue = Venue::Neutral;
        } else if (venue_tok.empty()) {
            rec.venue = Venue::Neutral;
            warn("line " + std::to_string(line_no) + ": missing venue, defaulting to neutral");
        } else {
            throw ParseError("unknown venue token '" + venue_tok + "' at line " +
                             std::to_string(line_no));
        }

        const std::string ti_tok = fields[f++];
        if (ti_tok == "1") {
            rec.team_innings = TeamInnings::First;
        } else if (ti_tok == "2") {
            rec.team_innings = TeamInnings::Second;
        } else if (ti_tok.empty()) {
            rec.team_innings = TeamInnings::Unknown;
            warn("line " + std::to_string(line_no) +
                 ": missing team innings, defaulting to neutral");
        } else {
            throw ParseError("unknown team innings token '" + ti_tok + "' at line " +
                             std::to_string(line_no));
        }

        career.innings.push_back(rec);
    }

    if (!header_seen || career.innings.empty())
        throw ParseError("empty career: " + fallback_id);
    validate(career);
    return career;
}

inline CareerRecord parse_career_file(const std::filesystem::path& path,
                                      std::vector<std::string>* warnings = nullptr) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open career file: " + path.string());
    try {
        return parse_career_stream(in, path.stem().string(), warnings);
    } catch (const ParseError& err) {
        throw ParseError(path.string() + ": " + err.what());
    }
}

inline const char* venue_token(Venue v) {
    switch (v) {
        case Venue::Home: return "home";
        case Venue::Away: return "away";
        case Venue::Neutral: return "neutral";
    }
    return "neutral";
}

inline const char* team_innings_token(TeamInnings ti) {
    switch (ti) {
        case TeamInnings::First: return "1";
        case TeamInnings::Second: return "2";
        case TeamInnings::Unknown: return "";
    }
    return "";
}

/// Canonical serialisation; parse(serialise(c)) == c and serialising a parsed
/// file reproduces its normalised rows byte for byte.
inline std::string serialise_career(const CareerRecord& career) {
    std::ostringstream out;
    out << "# player: " << career.player_id << "\n";
    out << "innings,runs,out,venue,team_innings\n";
    for (const auto& rec : career.innings) {
        out << rec.index << ',' << rec.runs << ',' << (rec.dismissed ? 1 : 0) << ','
            << venue_token(rec.venue) << ',' << team_innings_token(rec.team_innings) << '\n';
    }
    return out.str();
}

inline CareerRecord parse_career_string(const std::string& text, const std::string& player_id,
                                        std::vector<std::string>* warnings = nullptr) {
    std::istringstream in(text);
    return parse_career_stream(in, player_id, warnings);
}

}  // namespace crickgp
