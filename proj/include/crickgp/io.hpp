#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crickgp/career.hpp"
#include "crickgp/common.hpp"
#include "crickgp/evaluation.hpp"
#include "crickgp/inference.hpp"
#include "crickgp/nested.hpp"

namespace crickgp {

/// All numeric output uses 6 significant digits so reruns diff cleanly.
inline std::string fmt_g6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

/// Writes to a sibling temp file and renames into place, so readers never
/// observe a partial file.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open for writing: " + tmp.string());
        out << content;
        if (!out.flush()) throw DataError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

struct ParamSummary {
    double mean = 0.0;
    double median = 0.0;
    double lo68 = 0.0, hi68 = 0.0;
    double lo95 = 0.0, hi95 = 0.0;
};

/// Weighted posterior moments/quantiles of one parameter-vector coordinate.
inline ParamSummary weighted_param_summary(const NSResult& ns, std::size_t index) {
    std::vector<std::pair<double, double>> vw;  // (value, weight)
    vw.reserve(ns.samples.size());
    double mean = 0.0, total = 0.0;
    for (const NSSample& s : ns.samples) {
        const double w = std::exp(s.log_weight);
        if (w <= 0.0) continue;
        const double v = s.params.at(index);
        vw.emplace_back(v, w);
        mean += w * v;
        total += w;
    }
    if (vw.empty() || total <= 0.0)
        throw NumericalError("weighted_param_summary: no positive-weight samples");
    std::sort(vw.begin(), vw.end());
    const auto quantile = [&](double q) {
        double acc = 0.0;
        for (const auto& [v, w] : vw) {
            acc += w;
            if (acc >= q * total) return v;
        }
        return vw.back().first;
    };
    ParamSummary p;
    p.mean = mean / total;
    p.median = quantile(0.5);
    p.lo68 = quantile(0.16);
    p.hi68 = quantile(0.84);
    p.lo95 = quantile(0.025);
    p.hi95 = quantile(0.975);
    return p;
}

struct FitMeta {
    std::string player_id;
    int innings = 0;
    std::string model = "gp";  // "gp" or "constant"
    int n_live = 0;
    int mh_steps = 0;
    std::uint64_t seed = 0;
};

inline std::string samples_jsonl_text(const FitMeta& meta, const NSResult& ns) {
    std::ostringstream out;
    out << "{\"record\":\"header\",\"player\":\"" << json_escape(meta.player_id)
        << "\",\"innings\":" << meta.innings << ",\"model\":\"" << meta.model
        << "\",\"dimension\":"
        << (meta.model == "constant" ? constant_model_dimension
                                     : meta.innings + gp_model_scalars)
        << ",\"n_live\":" << meta.n_live << ",\"mh_steps\":" << meta.mh_steps
        << ",\"seed\":" << meta.seed << ",\"log_z\":" << fmt_g6(ns.log_z)
        << ",\"log_z_err\":" << fmt_g6(ns.log_z_err)
        << ",\"information\":" << fmt_g6(ns.information) << ",\"iterations\":" << ns.iterations
        << ",\"likelihood_calls\":" << ns.likelihood_calls
        << ",\"acceptance_rate\":" << fmt_g6(ns.acceptance_rate)
        << ",\"truncated\":" << (ns.truncated ? "true" : "false") << "}\n";
    for (const NSSample& s : ns.samples) {
        out << "{\"record\":\"sample\",\"params\":[";
        for (std::size_t i = 0; i < s.params.size(); ++i) {
            if (i) out << ',';
            out << fmt_g6(s.params[i]);
        }
        out << "],\"log_likelihood\":" << fmt_g6(s.log_likelihood)
            << ",\"log_weight\":" << fmt_g6(s.log_weight) << "}\n";
    }
    return out.str();
}

struct LoadedFit {
    FitMeta meta;
    NSResult ns;
};

inline LoadedFit read_samples_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open samples file: " + path.string());
    LoadedFit fit;
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": invalid JSON record: " + e.what());
        }
        const std::string record = j.value("record", "");
        if (record == "header") {
            fit.meta.player_id = j.value("player", "");
            fit.meta.innings = j.value("innings", 0);
            fit.meta.model = j.value("model", "gp");
            fit.meta.n_live = j.value("n_live", 0);
            fit.meta.mh_steps = j.value("mh_steps", 0);
            fit.meta.seed = j.value("seed", std::uint64_t{0});
            fit.ns.log_z = j.value("log_z", neg_inf);
            fit.ns.log_z_err = j.value("log_z_err", 0.0);
            fit.ns.information = j.value("information", 0.0);
            fit.ns.iterations = j.value("iterations", 0L);
            fit.ns.likelihood_calls = j.value("likelihood_calls", 0L);
            fit.ns.acceptance_rate = j.value("acceptance_rate", 0.0);
            fit.ns.truncated = j.value("truncated", false);
            have_header = true;
        } else if (record == "sample") {
            NSSample s;
            s.params = j.at("params").get<std::vector<double>>();
            s.log_likelihood = j.at("log_likelihood").get<double>();
            s.log_weight = j.at("log_weight").get<double>();
            fit.ns.samples.push_back(std::move(s));
        } else {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": unknown record type");
        }
    }
    if (!have_header) throw ParseError(path.string() + ": missing header record");
    if (fit.ns.samples.empty()) throw ParseError(path.string() + ": no sample records");
    return fit;
}

inline std::string trajectory_csv_text(const CareerRecord& career, const TrajectorySummary& s) {
    std::ostringstream out;
    out << "t,nu_median,nu_ci68_lo,nu_ci68_hi,nu_ci95_lo,nu_ci95_hi,nu_known_median,venue,"
           "team_innings\n";
    for (int t = 0; t < s.T + s.horizon; ++t) {
        const IntervalSummary& iv = s.nu[static_cast<std::size_t>(t)];
        out << (t + 1) << ',' << fmt_g6(iv.median) << ',' << fmt_g6(iv.lo68) << ','
            << fmt_g6(iv.hi68) << ',' << fmt_g6(iv.lo95) << ',' << fmt_g6(iv.hi95) << ',';
        if (t < s.T) {
            const InningsRecord& rec = career.innings[static_cast<std::size_t>(t)];
            out << fmt_g6(s.nu_known_median[static_cast<std::size_t>(t)]) << ','
                << venue_token(rec.venue) << ',' << team_innings_token(rec.team_innings);
        } else {
            out << ",,";
        }
        out << '\n';
    }
    return out.str();
}

inline void append_interval_json(std::ostringstream& out, const std::string& key,
                                 const IntervalSummary& iv) {
    out << "\"" << key << "_median\":" << fmt_g6(iv.median) << ",\"" << key << "_ci68\":["
        << fmt_g6(iv.lo68) << ',' << fmt_g6(iv.hi68) << "],\"" << key << "_ci95\":["
        << fmt_g6(iv.lo95) << ',' << fmt_g6(iv.hi95) << "]";
}

/// Parameter means and intervals in the style of a posterior summary table,
/// plus evidence and the trajectory-derived predictions.
inline std::string summary_json_text(const CareerRecord& career, const FitMeta& meta,
                                     const NSResult& ns, const TrajectorySummary& traj,
                                     int horizon) {
    static const char* names[gp_model_scalars] = {"C",     "D",   "lambda", "sigma",
                                                  "ell",   "alpha", "psi",  "phi"};
    int dismissals = 0;
    for (const auto& rec : career.innings) dismissals += rec.dismissed ? 1 : 0;

    std::ostringstream out;
    out << "{\"player\":\"" << json_escape(meta.player_id) << "\",\"innings\":" << meta.innings
        << ",\"dismissals\":" << dismissals << ",\"career_average\":";
    if (dismissals > 0)
        out << fmt_g6(career_average(career));
    else
        out << "null";
    out << ",\"model\":\"" << meta.model << "\",\"n_live\":" << meta.n_live
        << ",\"mh_steps\":" << meta.mh_steps << ",\"seed\":" << meta.seed
        << ",\"horizon\":" << horizon << ",\"log_z\":" << fmt_g6(ns.log_z)
        << ",\"log_z_err\":" << fmt_g6(ns.log_z_err)
        << ",\"information\":" << fmt_g6(ns.information)
        << ",\"ess\":" << fmt_g6(traj.ess);
    for (int i = 0; i < gp_model_scalars; ++i) {
        const ParamSummary p = weighted_param_summary(ns, static_cast<std::size_t>(i));
        out << ",\"" << names[i] << "_mean\":" << fmt_g6(p.mean) << ",\"" << names[i]
            << "_median\":" << fmt_g6(p.median) << ",\"" << names[i] << "_ci68\":["
            << fmt_g6(p.lo68) << ',' << fmt_g6(p.hi68) << "],\"" << names[i] << "_ci95\":["
            << fmt_g6(p.lo95) << ',' << fmt_g6(p.hi95) << "]";
    }
    out << ',';
    append_interval_json(out, "nu_next", traj.next_innings);
    out << ',';
    append_interval_json(out, "career_low", traj.career_low);
    out << ',';
    append_interval_json(out, "career_high", traj.career_high);
    {
        std::vector<double> lows(traj.argmin_samples.begin(), traj.argmin_samples.end());
        std::vector<double> highs(traj.argmax_samples.begin(), traj.argmax_samples.end());
        std::sort(lows.begin(), lows.end());
        std::sort(highs.begin(), highs.end());
        out << ",\"argmin_median\":" << fmt_g6(sample_quantile(lows, 0.5))
            << ",\"argmax_median\":" << fmt_g6(sample_quantile(highs, 0.5));
    }
    out << ",\"warnings\":[";
    for (std::size_t i = 0; i < traj.warnings.size(); ++i) {
        if (i) out << ',';
        out << '"' << json_escape(traj.warnings[i]) << '"';
    }
    out << "]}\n";
    return out.str();
}

inline std::string rankings_csv_text(const std::vector<RankEntry>& ranked) {
    std::ostringstream out;
    out << "rank,player,innings,career_average,nu_next_median,ci68_lo,ci68_hi\n";
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const RankEntry& r = ranked[i];
        out << (i + 1) << ',' << csv_field(r.player_id) << ',' << r.innings << ','
            << fmt_g6(r.career_average) << ',' << fmt_g6(r.nu_next_median) << ','
            << fmt_g6(r.ci68_lo) << ',' << fmt_g6(r.ci68_hi) << '\n';
    }
    return out.str();
}

struct EvidenceRow {
    std::string player;
    double log_z = 0.0;
    double log_z0 = 0.0;
};

inline std::string evidence_csv_text(const std::vector<EvidenceRow>& rows) {
    std::ostringstream out;
    out << "player,log_z,log_z0,log_bayes_factor\n";
    for (const EvidenceRow& r : rows)
        out << csv_field(r.player) << ',' << fmt_g6(r.log_z) << ',' << fmt_g6(r.log_z0) << ','
            << fmt_g6(r.log_z - r.log_z0) << '\n';
    return out.str();
}

inline std::string loocv_csv_text(const LoocvResult& result) {
    std::ostringstream out;
    out << "model,min_innings,mse,n_players\n";
    for (const LoocvRow& r : result.rows)
        out << r.model << ',' << r.min_innings << ',' << fmt_g6(r.mse) << ',' << r.n_players
            << '\n';
    return out.str();
}

inline std::string hier_csv_text(const HierResult& result, const std::string& effect) {
    std::ostringstream out;
    out << "chain,step,mu_" << effect << ",sigma_" << effect << '\n';
    for (const HierDraw& d : result.draws)
        out << d.chain << ',' << d.step << ',' << fmt_g6(d.mu_eff) << ',' << fmt_g6(d.sigma_eff)
            << '\n';
    return out.str();
}

}  // namespace crickgp
