#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crickgp/career.hpp"
#include "crickgp/common.hpp"
#include "crickgp/evaluation.hpp"
#include "crickgp/inference.hpp"
#include "crickgp/io.hpp"
#include "crickgp/nested.hpp"
#include "crickgp/parallel.hpp"

namespace fs = std::filesystem;
using namespace crickgp;

namespace {

struct Options {
    std::vector<std::string> inputs;
    std::string outdir = ".";
    int nlive = 200;
    int mh_steps = 100;
    int horizon = 20;
    std::uint64_t seed = 0;
    int min_innings = 0;
    int workers = default_worker_count();
    std::string effect = "psi";
    std::string truth_file;
    int sim_players = 1;
    int sim_innings = 100;
    double censor_fraction = 0.1;
    bool ns_log = false;
};

std::string file_slug(const std::string& id) {
    std::string s;
    for (char c : id) {
        const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                          (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
        s += keep ? c : '_';
    }
    if (s.empty()) s = "player";
    return s;
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs,
                                    const std::string& extension) {
    std::vector<fs::path> files;
    for (const std::string& raw : inputs) {
        const fs::path p(raw);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(p)) {
                if (!entry.is_regular_file()) continue;
                const std::string name = entry.path().filename().string();
                if (name.size() >= extension.size() &&
                    name.compare(name.size() - extension.size(), extension.size(), extension) == 0)
                    found.push_back(entry.path());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(p);
        }
    }
    if (files.empty()) throw DataError("no input files found");
    return files;
}

std::vector<CareerRecord> load_careers(const Options& opt) {
    std::vector<CareerRecord> careers;
    for (const fs::path& p : expand_inputs(opt.inputs, ".csv")) {
        std::vector<std::string> warnings;
        CareerRecord career = parse_career_file(p, &warnings);
        for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
        if (career.length() < std::max(1, opt.min_innings)) {
            std::cerr << "skipping " << career.player_id << ": " << career.length()
                      << " innings < minimum " << opt.min_innings << "\n";
            continue;
        }
        careers.push_back(std::move(career));
    }
    if (careers.empty()) throw DataError("no careers satisfy the innings minimum");
    return careers;
}

/// Unique output stem per player, deterministic in input order.
std::vector<std::string> player_slugs(const std::vector<CareerRecord>& careers) {
    std::vector<std::string> slugs;
    std::map<std::string, int> seen;
    for (const CareerRecord& c : careers) {
        std::string s = file_slug(c.player_id);
        const int n = ++seen[s];
        if (n > 1) s += "_" + std::to_string(n);
        slugs.push_back(s);
    }
    return slugs;
}

FitConfig fit_config_for(const Options& opt, const std::string& tag) {
    FitConfig cfg;
    cfg.n_live = opt.nlive;
    cfg.mh_steps = opt.mh_steps;
    cfg.seed = derive_seed(opt.seed, tag);
    return cfg;
}

void attach_ns_log(FitConfig& cfg, const fs::path& log_path,
                   std::shared_ptr<std::ofstream>& log_out) {
    log_out = std::make_shared<std::ofstream>(log_path, std::ios::trunc);
    std::shared_ptr<std::ofstream> out = log_out;
    cfg.progress = [out](const NSProgress& p) {
        if (p.iteration % 50 != 0) return;
        *out << "{\"record\":\"progress\",\"iteration\":" << p.iteration
             << ",\"log_x\":" << fmt_g6(p.log_x) << ",\"log_z\":" << fmt_g6(p.log_z)
             << ",\"log_l_worst\":" << fmt_g6(p.log_l_worst)
             << ",\"likelihood_calls\":" << p.likelihood_calls << "}\n";
    };
}

int cmd_fit(const Options& opt) {
    const std::vector<CareerRecord> careers = load_careers(opt);
    const std::vector<std::string> slugs = player_slugs(careers);
    const fs::path outdir(opt.outdir);
    fs::create_directories(outdir);

    parallel_for(careers.size(), opt.workers, [&](std::size_t i) {
        const CareerRecord& career = careers[i];
        FitConfig cfg = fit_config_for(opt, career.player_id);
        std::shared_ptr<std::ofstream> log_out;
        if (opt.ns_log) attach_ns_log(cfg, outdir / (slugs[i] + ".nsrun.jsonl"), log_out);
        const NSResult ns = fit_player(career, cfg);
        const TrajectorySummary traj = summarise_trajectory(career, ns, opt.horizon, cfg.seed);

        FitMeta meta;
        meta.player_id = career.player_id;
        meta.innings = career.length();
        meta.model = "gp";
        meta.n_live = cfg.n_live;
        meta.mh_steps = cfg.mh_steps;
        meta.seed = cfg.seed;
        atomic_write_file(outdir / (slugs[i] + ".samples.jsonl"), samples_jsonl_text(meta, ns));
        atomic_write_file(outdir / (slugs[i] + ".trajectory.csv"),
                          trajectory_csv_text(career, traj));
        atomic_write_file(outdir / (slugs[i] + ".summary.json"),
                          summary_json_text(career, meta, ns, traj, opt.horizon));
        std::cerr << "fitted " << career.player_id << ": log_z=" << fmt_g6(ns.log_z) << " +- "
                  << fmt_g6(ns.log_z_err) << ", ess=" << fmt_g6(traj.ess) << "\n";
    });
    return 0;
}

int cmd_predict(const Options& opt) {
    const std::vector<fs::path> files = expand_inputs(opt.inputs, ".samples.jsonl");
    if (files.size() != 2)
        throw DataError("predict requires exactly two .samples.jsonl inputs (A then B)");
    const LoadedFit a = read_samples_jsonl(files[0]);
    const LoadedFit b = read_samples_jsonl(files[1]);
    const auto draws_a = predictive_draws(a.ns, a.meta.model == "constant",
                                          derive_seed(opt.seed, a.meta.player_id));
    const auto draws_b = predictive_draws(b.ns, b.meta.model == "constant",
                                          derive_seed(opt.seed, b.meta.player_id));
    const HeadToHeadResult h = head_to_head(draws_a, draws_b, opt.seed);

    const fs::path outdir(opt.outdir);
    fs::create_directories(outdir);
    std::ostringstream csv;
    csv << "player_a,player_b,prob_a_beats_b,mean_margin\n"
        << csv_field(a.meta.player_id) << ',' << csv_field(b.meta.player_id) << ','
        << fmt_g6(h.prob_a_beats_b) << ',' << fmt_g6(h.mean_margin) << '\n';
    atomic_write_file(outdir / "head_to_head.csv", csv.str());
    std::cout << "P(" << a.meta.player_id << " outscores " << b.meta.player_id
              << " next innings) = " << fmt_g6(h.prob_a_beats_b)
              << ", mean margin = " << fmt_g6(h.mean_margin) << " runs\n";
    return 0;
}

int cmd_rank(const Options& opt) {
    std::vector<RankEntry> entries;
    for (const fs::path& p : expand_inputs(opt.inputs, ".summary.json")) {
        std::ifstream in(p);
        if (!in) throw DataError("cannot open summary: " + p.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(p.string() + ": invalid JSON: " + e.what());
        }
        RankEntry entry;
        entry.player_id = j.at("player").get<std::string>();
        entry.innings = j.at("innings").get<int>();
        entry.career_average = j.at("career_average").is_null()
                                   ? std::numeric_limits<double>::quiet_NaN()
                                   : j.at("career_average").get<double>();
        entry.nu_next_median = j.at("nu_next_median").get<double>();
        entry.ci68_lo = j.at("nu_next_ci68").at(0).get<double>();
        entry.ci68_hi = j.at("nu_next_ci68").at(1).get<double>();
        entries.push_back(std::move(entry));
    }
    const std::vector<RankEntry> ranked = rank_players(std::move(entries));
    const fs::path outdir(opt.outdir);
    fs::create_directories(outdir);
    atomic_write_file(outdir / "rankings.csv", rankings_csv_text(ranked));
    return 0;
}

int cmd_evidence(const Options& opt) {
    const std::vector<CareerRecord> careers = load_careers(opt);
    std::vector<EvidenceRow> rows(careers.size());
    parallel_for(careers.size(), opt.workers, [&](std::size_t i) {
        const CareerRecord& career = careers[i];
        const NSResult gp = fit_player(career, fit_config_for(opt, career.player_id + ":gp"));
        const NSResult z0 =
            fit_constant_model(career, fit_config_for(opt, career.player_id + ":z0"));
        rows[i] = {career.player_id, gp.log_z, z0.log_z};
        std::cerr << "evidence " << career.player_id << ": log_z=" << fmt_g6(gp.log_z)
                  << " log_z0=" << fmt_g6(z0.log_z) << " bf=" << fmt_g6(gp.log_z - z0.log_z)
                  << "\n";
    });
    const fs::path outdir(opt.outdir);
    fs::create_directories(outdir);
    atomic_write_file(outdir / "evidence.csv", evidence_csv_text(rows));
    return 0;
}

int cmd_loocv(const Options& opt, bool min_innings_given) {
    LoocvOptions lopt;
    lopt.fit.n_live = opt.nlive;
    lopt.fit.mh_steps = opt.mh_steps;
    lopt.workers = opt.workers;
    lopt.seed = opt.seed;
    if (min_innings_given) lopt.min_innings_filters = {opt.min_innings};
    Options load_opt = opt;
    load_opt.min_innings = 0;  // filters are applied to the error table, not ingestion
    const LoocvResult result = loocv_mse(load_careers(load_opt), lopt);
    if (result.excluded > 0)
        std::cerr << "loocv: excluded " << result.excluded
                  << " player(s) failing holdout preconditions\n";
    const fs::path outdir(opt.outdir);
    fs::create_directories(outdir);
    atomic_write_file(outdir / "loocv.csv", loocv_csv_text(result));
    return 0;
}

int cmd_hier(const Options& opt) {
    if (opt.effect != "psi" && opt.effect != "phi")
        throw DataError("--effect must be psi or phi");
    std::vector<std::vector<double>> effect_samples;
    std::vector<std::string> ids;
    for (const fs::path& p : expand_inputs(opt.inputs, ".samples.jsonl")) {
        const LoadedFit fit = read_samples_jsonl(p);
        const bool constant = fit.meta.model == "constant";
        const std::size_t index = constant ? (opt.effect == "psi" ? 3 : 4)
                                           : (opt.effect == "psi" ? 6 : 7);
        Rng rng(derive_seed(opt.seed, "hier:" + fit.meta.player_id));
        std::vector<double> values;
        for (std::size_t s : posterior_resample(fit.ns, summary_draw_count, rng))
            values.push_back(fit.ns.samples[s].params.at(index));
        effect_samples.push_back(std::move(values));
        ids.push_back(fit.meta.player_id);
    }
    HierConfig cfg;
    cfg.seed = derive_seed(opt.seed, "hier:" + opt.effect);
    cfg.workers = opt.workers;
    const HierResult result = hierarchical_postprocess(effect_samples, cfg, ids);
    for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << "hier " << opt.effect << ": rhat_mu=" << fmt_g6(result.rhat_mu)
              << " rhat_sigma=" << fmt_g6(result.rhat_sigma) << "\n";
    const fs::path outdir(opt.outdir);
    fs::create_directories(outdir);
    atomic_write_file(outdir / ("hier_" + opt.effect + ".csv"),
                      hier_csv_text(result, opt.effect));
    return 0;
}

std::map<std::string, std::string> parse_key_value_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open truth file: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected key=value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

int cmd_simulate(const Options& opt) {
    if (opt.truth_file.empty()) throw DataError("simulate requires --truth FILE");
    const auto kv = parse_key_value_file(opt.truth_file);
    ModelParams truth;
    int T = opt.sim_innings;
    int players = opt.sim_players;
    double censor = opt.censor_fraction;
    const auto get = [&kv](const std::string& key, double fallback) {
        const auto it = kv.find(key);
        return it == kv.end() ? fallback : std::stod(it->second);
    };
    truth.C = get("C", truth.C);
    truth.D = get("D", truth.D);
    truth.lambda = get("lambda", truth.lambda);
    truth.sigma = get("sigma", truth.sigma);
    truth.ell = get("ell", truth.ell);
    truth.alpha = get("alpha", truth.alpha);
    truth.psi = get("psi", truth.psi);
    truth.phi = get("phi", truth.phi);
    T = static_cast<int>(get("T", T));
    players = static_cast<int>(get("players", players));
    censor = get("censor_fraction", censor);

    const fs::path outdir = fs::path(opt.outdir) / "simulated";
    fs::create_directories(outdir);
    for (int p = 0; p < players; ++p) {
        char id[16];
        std::snprintf(id, sizeof id, "sim%03d", p + 1);
        Rng rng(derive_seed(opt.seed, std::string("simulate:") + id));
        const auto schedule = random_schedule(T, rng);
        const CareerRecord career = simulate_career(truth, T, schedule, rng, censor, id);
        atomic_write_file(outdir / (std::string(id) + ".csv"), serialise_career(career));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian Gaussian-process batting trajectory model"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file; flags take precedence");

    Options opt;
    app.add_option("--input", opt.inputs, "input file(s) or directory");
    app.add_option("--outdir", opt.outdir, "output directory");
    app.add_option("--nlive", opt.nlive, "nested-sampling live points")
        ->check(CLI::PositiveNumber);
    app.add_option("--mh-steps", opt.mh_steps, "Metropolis steps per replacement")
        ->check(CLI::PositiveNumber);
    app.add_option("--horizon", opt.horizon, "forecast horizon in innings")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--seed", opt.seed, "base random seed");
    auto* min_innings_opt =
        app.add_option("--min-innings", opt.min_innings, "minimum career innings filter")
            ->check(CLI::NonNegativeNumber);
    app.add_option("--workers", opt.workers, "worker thread count")
        ->envname("CRICKGP_WORKERS")
        ->check(CLI::PositiveNumber);
    app.add_option("--effect", opt.effect, "hierarchical effect: psi or phi");
    app.add_option("--truth", opt.truth_file, "truth specification file for simulate");
    app.add_option("--players", opt.sim_players, "number of careers to simulate")
        ->check(CLI::PositiveNumber);
    app.add_option("--innings", opt.sim_innings, "innings per simulated career")
        ->check(CLI::PositiveNumber);
    app.add_option("--censor-fraction", opt.censor_fraction,
                   "not-out fraction for simulated careers");
    app.add_flag("--ns-log", opt.ns_log, "write per-player sampler run logs");

    CLI::App* fit = app.add_subcommand("fit", "fit the GP model to career file(s)");
    CLI::App* predict =
        app.add_subcommand("predict", "head-to-head next-innings comparison of two fits");
    CLI::App* rank = app.add_subcommand("rank", "rank fitted players by next-innings median");
    CLI::App* evidence =
        app.add_subcommand("evidence", "GP vs constant-ability marginal likelihoods");
    CLI::App* loocv = app.add_subcommand("loocv", "leave-one-out prediction error table");
    CLI::App* hier =
        app.add_subcommand("hier", "hierarchical post-processing of venue/innings effects");
    CLI::App* simulate = app.add_subcommand("simulate", "generate synthetic careers");
    for (CLI::App* sub : {fit, predict, rank, evidence, loocv, hier, simulate})
        sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (command == "fit") return cmd_fit(opt);
        if (command == "predict") return cmd_predict(opt);
        if (command == "rank") return cmd_rank(opt);
        if (command == "evidence") return cmd_evidence(opt);
        if (command == "loocv") return cmd_loocv(opt, min_innings_opt->count() > 0);
        if (command == "hier") return cmd_hier(opt);
        if (command == "simulate") return cmd_simulate(opt);
        throw DataError("unknown command: " + command);
    } catch (const std::exception& e) {
        std::cerr << "{\"error\":\"" << json_escape(e.what()) << "\",\"command\":\""
                  << json_escape(command) << "\"}\n";
        return 1;
    }
}
