#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>
#include <vector>

#include "crickgp/career.hpp"

using namespace crickgp;
using Catch::Approx;

namespace {

const std::string basic_csv =
    "# player: A. Batter\n"
    "innings,runs,out,venue,team_innings\n"
    "1,12,1,home,1\n"
    "2,40,0,away,2\n"
    "3,0,1,neutral,1\n";

}  // namespace

TEST_CASE("parses a well-formed career file", "[career]") {
    const CareerRecord c = parse_career_string(basic_csv, "fallback");
    CHECK(c.player_id == "A. Batter");
    REQUIRE(c.length() == 3);
    CHECK(c.innings[0] == InningsRecord{1, 12, true, Venue::Home, TeamInnings::First});
    CHECK(c.innings[1] == InningsRecord{2, 40, false, Venue::Away, TeamInnings::Second});
    CHECK(c.innings[2] == InningsRecord{3, 0, true, Venue::Neutral, TeamInnings::First});
}

TEST_CASE("header may omit the innings index column", "[career]") {
    const CareerRecord c = parse_career_string(
        "runs,out,venue,team_innings\n5,1,home,1\n7,0,away,2\n", "p");
    REQUIRE(c.length() == 2);
    CHECK(c.innings[0].index == 1);
    CHECK(c.innings[1].index == 2);
    CHECK(c.innings[1].runs == 7);
}

TEST_CASE("career_average is runs per dismissal", "[career]") {
    const CareerRecord c = parse_career_string(basic_csv, "p");
    CHECK(career_average(c) == Approx(52.0 / 2.0));

    CareerRecord all_not_out = c;
    for (auto& rec : all_not_out.innings) rec.dismissed = false;
    CHECK_THROWS_AS(career_average(all_not_out), DataError);
}

TEST_CASE("missing venue or team innings defaults to neutral with a warning", "[career]") {
    std::vector<std::string> warnings;
    const CareerRecord c = parse_career_string(
        "innings,runs,out,venue,team_innings\n1,10,1,,\n", "p", &warnings);
    CHECK(c.innings[0].venue == Venue::Neutral);
    CHECK(c.innings[0].team_innings == TeamInnings::Unknown);
    REQUIRE(warnings.size() == 2);
    CHECK(warnings[0].find("line 2") != std::string::npos);
}

TEST_CASE("parse errors carry line numbers", "[career]") {
    const std::string bad_venue =
        "innings,runs,out,venue,team_innings\n1,10,1,home,1\n2,3,1,mars,2\n";
    CHECK_THROWS_WITH(parse_career_string(bad_venue, "p"),
                      Catch::Matchers::ContainsSubstring("line 3") &&
                          Catch::Matchers::ContainsSubstring("mars"));

    const std::string bad_out = "innings,runs,out,venue,team_innings\n1,10,2,home,1\n";
    CHECK_THROWS_AS(parse_career_string(bad_out, "p"), ParseError);

    const std::string bad_runs = "innings,runs,out,venue,team_innings\n1,-3,1,home,1\n";
    CHECK_THROWS_AS(parse_career_string(bad_runs, "p"), ParseError);
}

TEST_CASE("rejects non-contiguous innings indices", "[career]") {
    const std::string gap = "innings,runs,out,venue,team_innings\n1,10,1,home,1\n3,5,1,home,1\n";
    CHECK_THROWS_WITH(parse_career_string(gap, "p"),
                      Catch::Matchers::ContainsSubstring("contiguous"));
}

TEST_CASE("empty or header-only input is an error", "[career]") {
    CHECK_THROWS_AS(parse_career_string("", "p"), ParseError);
    CHECK_THROWS_AS(parse_career_string("innings,runs,out,venue,team_innings\n", "p"),
                    ParseError);
    CHECK_THROWS_AS(parse_career_string("# only a comment\n", "p"), ParseError);
}

TEST_CASE("comment lines and blank lines are ignored", "[career]") {
    const CareerRecord c = parse_career_string(
        "# leading comment\n\ninnings,runs,out,venue,team_innings\n# mid comment\n1,10,1,home,1\n\n",
        "p");
    CHECK(c.length() == 1);
    CHECK(c.player_id == "p");
}

TEST_CASE("serialise and reparse round-trips exactly", "[career]") {
    const CareerRecord c = parse_career_string(basic_csv, "fallback");
    const std::string text = serialise_career(c);
    const CareerRecord back = parse_career_string(text, "other");
    CHECK(back == c);
}

TEST_CASE("windows line endings are accepted", "[career]") {
    const CareerRecord c = parse_career_string(
        "innings,runs,out,venue,team_innings\r\n1,10,1,home,1\r\n", "p");
    CHECK(c.length() == 1);
    CHECK(c.innings[0].runs == 10);
}
