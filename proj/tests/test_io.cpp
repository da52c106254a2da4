#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crickgp/career.hpp"
#include "crickgp/common.hpp"
#include "crickgp/io.hpp"

using namespace crickgp;
using Catch::Approx;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir() {
    const fs::path dir = fs::temp_directory_path() / "crickgp_io_test";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

// every value below is exactly representable in 6 significant digits, so
// text round-trips compare bit for bit
NSResult tiny_ns() {
    NSResult ns;
    ns.log_z = -4.5;
    ns.log_z_err = 0.125;
    ns.information = 2.5;
    ns.iterations = 320;
    ns.likelihood_calls = 12800;
    ns.acceptance_rate = 0.375;
    ns.truncated = false;
    NSSample a;
    a.params = {0.25, 0.125, 25.0, 0.5, 20.0, 1.5, 1.25, 0.75};
    a.log_likelihood = -1.5;
    a.log_weight = -0.625;
    NSSample b;
    b.params = {0.5, 0.25, 30.0, 0.25, 10.0, 1.75, 1.0, 1.25};
    b.log_likelihood = -2.5;
    b.log_weight = -0.625;
    ns.samples = {a, b};
    return ns;
}

FitMeta tiny_meta() {
    FitMeta meta;
    meta.player_id = "t. tester";
    meta.innings = 2;
    meta.model = "gp";
    meta.n_live = 50;
    meta.mh_steps = 25;
    meta.seed = 42;
    return meta;
}

CareerRecord tiny_career() {
    CareerRecord c;
    c.player_id = "t. tester";
    c.innings.push_back({1, 34, true, Venue::Home, TeamInnings::First});
    c.innings.push_back({2, 12, false, Venue::Away, TeamInnings::Second});
    return c;
}

TrajectorySummary tiny_traj(int horizon) {
    TrajectorySummary s;
    s.T = 2;
    s.horizon = horizon;
    for (int t = 0; t < s.T + horizon; ++t)
        s.nu.push_back({30.0 + t, 25.0 + t, 35.0 + t, 20.0 + t, 40.0 + t});
    s.nu_known_median = {31.5, 29.25};
    s.next_innings = {32.0, 27.0, 37.0, 22.0, 42.0};
    s.career_low = {24.0, 22.0, 26.0, 20.0, 28.0};
    s.career_high = {38.0, 36.0, 40.0, 34.0, 42.0};
    s.argmin_samples = {1, 1, 2};
    s.argmax_samples = {2, 2, 2};
    s.ess = 123.5;
    s.warnings = {"low effective sample size: 9.5 < 100"};
    return s;
}

}  // namespace

TEST_CASE("fmt_g6 prints six significant digits", "[io]") {
    CHECK(fmt_g6(0.25) == "0.25");
    CHECK(fmt_g6(1.0 / 3.0) == "0.333333");
    CHECK(fmt_g6(1234567.0) == "1.23457e+06");
    CHECK(fmt_g6(-0.000123456789) == "-0.000123457");
    CHECK(fmt_g6(0.0) == "0");
    CHECK(fmt_g6(42.0) == "42");
}

TEST_CASE("json_escape handles quotes and control characters", "[io]") {
    CHECK(json_escape("plain") == "plain");
    CHECK(json_escape("a\"b") == "a\\\"b");
    CHECK(json_escape("a\\b") == "a\\\\b");
    CHECK(json_escape("a\nb\tc") == "a\\nb\\tc");
    CHECK(json_escape(std::string(1, '\x01')) == "\\u0001");
    // escaped strings must parse back to the original
    const std::string nasty = "x\"y\\z\n\t\r";
    const auto j = nlohmann::json::parse("\"" + json_escape(nasty) + "\"");
    CHECK(j.get<std::string>() == nasty);
}

TEST_CASE("csv_field quotes only when needed", "[io]") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_field("two\nlines") == "\"two\nlines\"");
    CHECK(csv_field("") == "");
}

TEST_CASE("atomic_write_file writes, overwrites, and leaves no temp file", "[io]") {
    const fs::path dir = scratch_dir();
    const fs::path target = dir / "atomic.txt";
    atomic_write_file(target, "first\n");
    CHECK(slurp(target) == "first\n");
    atomic_write_file(target, "second\n");
    CHECK(slurp(target) == "second\n");
    CHECK_FALSE(fs::exists(target.string() + ".tmp"));
    CHECK_THROWS_AS(atomic_write_file(dir / "no_such_dir" / "x.txt", "y"), DataError);
}

TEST_CASE("samples jsonl round-trips through the reader", "[io]") {
    const NSResult ns = tiny_ns();
    const FitMeta meta = tiny_meta();
    const fs::path path = scratch_dir() / "fit.samples.jsonl";
    atomic_write_file(path, samples_jsonl_text(meta, ns));

    const LoadedFit fit = read_samples_jsonl(path);
    CHECK(fit.meta.player_id == meta.player_id);
    CHECK(fit.meta.innings == meta.innings);
    CHECK(fit.meta.model == meta.model);
    CHECK(fit.meta.n_live == meta.n_live);
    CHECK(fit.meta.mh_steps == meta.mh_steps);
    CHECK(fit.meta.seed == meta.seed);
    CHECK(fit.ns.log_z == ns.log_z);
    CHECK(fit.ns.log_z_err == ns.log_z_err);
    CHECK(fit.ns.information == ns.information);
    CHECK(fit.ns.iterations == ns.iterations);
    CHECK(fit.ns.likelihood_calls == ns.likelihood_calls);
    CHECK(fit.ns.acceptance_rate == ns.acceptance_rate);
    CHECK(fit.ns.truncated == ns.truncated);
    REQUIRE(fit.ns.samples.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(fit.ns.samples[i].params == ns.samples[i].params);
        CHECK(fit.ns.samples[i].log_likelihood == ns.samples[i].log_likelihood);
        CHECK(fit.ns.samples[i].log_weight == ns.samples[i].log_weight);
    }

    // the header advertises the gp dimension for the innings count
    const auto first_line = lines_of(slurp(path)).front();
    const auto j = nlohmann::json::parse(first_line);
    CHECK(j["dimension"].get<int>() == meta.innings + 8);
}

TEST_CASE("samples reader rejects malformed files", "[io]") {
    const fs::path dir = scratch_dir();
    CHECK_THROWS_AS(read_samples_jsonl(dir / "nope.jsonl"), DataError);

    const fs::path header_only = dir / "header_only.jsonl";
    atomic_write_file(header_only, R"({"record":"header","player":"x"})"
                                   "\n");
    CHECK_THROWS_AS(read_samples_jsonl(header_only), ParseError);

    const fs::path no_header = dir / "no_header.jsonl";
    atomic_write_file(no_header,
                      R"({"record":"sample","params":[0.5],"log_likelihood":-1,"log_weight":0})"
                      "\n");
    CHECK_THROWS_AS(read_samples_jsonl(no_header), ParseError);

    const fs::path garbage = dir / "garbage.jsonl";
    atomic_write_file(garbage, "{not json\n");
    CHECK_THROWS_MATCHES(read_samples_jsonl(garbage), ParseError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("garbage.jsonl:1")));

    const fs::path unknown = dir / "unknown.jsonl";
    atomic_write_file(unknown, R"({"record":"mystery"})"
                               "\n");
    CHECK_THROWS_AS(read_samples_jsonl(unknown), ParseError);
}

TEST_CASE("trajectory csv carries context for data rows only", "[io]") {
    const CareerRecord career = tiny_career();
    const std::string text = trajectory_csv_text(career, tiny_traj(1));
    const auto rows = lines_of(text);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] ==
          "t,nu_median,nu_ci68_lo,nu_ci68_hi,nu_ci95_lo,nu_ci95_hi,nu_known_median,venue,"
          "team_innings");
    CHECK(rows[1] == "1,30,25,35,20,40,31.5,home,1");
    CHECK(rows[2] == "2,31,26,36,21,41,29.25,away,2");
    CHECK(rows[3] == "3,32,27,37,22,42,,,");

    const auto no_forecast = lines_of(trajectory_csv_text(career, tiny_traj(0)));
    CHECK(no_forecast.size() == 3);
}

TEST_CASE("summary json exposes the parameter table and predictions", "[io]") {
    const std::string text =
        summary_json_text(tiny_career(), tiny_meta(), tiny_ns(), tiny_traj(1), 1);
    const auto j = nlohmann::json::parse(text);
    CHECK(j["player"] == "t. tester");
    CHECK(j["innings"] == 2);
    CHECK(j["dismissals"] == 1);
    CHECK(j["career_average"].get<double>() == Approx(46.0));
    CHECK(j["model"] == "gp");
    CHECK(j["horizon"] == 1);
    CHECK(j["log_z"].get<double>() == -4.5);
    CHECK(j["ess"].get<double>() == 123.5);
    for (const char* name : {"C", "D", "lambda", "sigma", "ell", "alpha", "psi", "phi"}) {
        CHECK(j.contains(std::string(name) + "_mean"));
        CHECK(j.contains(std::string(name) + "_median"));
        CHECK(j[std::string(name) + "_ci68"].size() == 2);
        CHECK(j[std::string(name) + "_ci95"].size() == 2);
    }
    // equal weights: psi mean is the plain average of 1.25 and 1.0
    CHECK(j["psi_mean"].get<double>() == Approx(1.125));
    CHECK(j["nu_next_median"].get<double>() == 32.0);
    CHECK(j["career_low_median"].get<double>() == 24.0);
    CHECK(j["career_high_median"].get<double>() == 38.0);
    CHECK(j["argmin_median"].get<double>() == 1.0);
    CHECK(j["argmax_median"].get<double>() == 2.0);
    REQUIRE(j["warnings"].size() == 1);
    CHECK(j["warnings"][0].get<std::string>().find("effective sample size") != std::string::npos);
}

TEST_CASE("summary json reports a null average for the never-dismissed", "[io]") {
    CareerRecord c;
    c.player_id = "carried the bat";
    c.innings.push_back({1, 50, false, Venue::Neutral, TeamInnings::Unknown});
    c.innings.push_back({2, 60, false, Venue::Neutral, TeamInnings::Unknown});
    FitMeta meta = tiny_meta();
    meta.player_id = c.player_id;
    const auto j = nlohmann::json::parse(summary_json_text(c, meta, tiny_ns(), tiny_traj(1), 1));
    CHECK(j["career_average"].is_null());
    CHECK(j["dismissals"] == 0);
}

TEST_CASE("rankings csv lists players in given order with 1-based ranks", "[io]") {
    std::vector<RankEntry> ranked{
        {"a, the great", 120, 51.25, 48.5, 44.0, 53.0},
        {"b", 40, 38.5, 36.25, 30.0, 42.0},
    };
    const auto rows = lines_of(rankings_csv_text(ranked));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == "rank,player,innings,career_average,nu_next_median,ci68_lo,ci68_hi");
    CHECK(rows[1] == "1,\"a, the great\",120,51.25,48.5,44,53");
    CHECK(rows[2] == "2,b,40,38.5,36.25,30,42");
}

TEST_CASE("evidence csv derives the bayes factor column", "[io]") {
    const auto rows = lines_of(evidence_csv_text({{"p1", -210.5, -213.0}, {"p2", -98.0, -97.5}}));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == "player,log_z,log_z0,log_bayes_factor");
    CHECK(rows[1] == "p1,-210.5,-213,2.5");
    CHECK(rows[2] == "p2,-98,-97.5,-0.5");
}

TEST_CASE("loocv and hier csv writers match their structs", "[io]") {
    LoocvResult loo;
    loo.rows.push_back({"gp", 0, 544.0, 20});
    loo.rows.push_back({"sma_100", 10, 589.125, 18});
    const auto loo_rows = lines_of(loocv_csv_text(loo));
    REQUIRE(loo_rows.size() == 3);
    CHECK(loo_rows[0] == "model,min_innings,mse,n_players");
    CHECK(loo_rows[1] == "gp,0,544,20");
    CHECK(loo_rows[2] == "sma_100,10,589.125,18");

    HierResult hier;
    hier.draws.push_back({0, 25000, 1.0625, 0.1875});
    hier.draws.push_back({1, 25010, 1.03125, 0.21875});
    const auto hier_rows = lines_of(hier_csv_text(hier, "psi"));
    REQUIRE(hier_rows.size() == 3);
    CHECK(hier_rows[0] == "chain,step,mu_psi,sigma_psi");
    CHECK(hier_rows[1] == "0,25000,1.0625,0.1875");
    CHECK(hier_rows[2] == "1,25010,1.03125,0.21875");
}
