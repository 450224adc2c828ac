#include "tdpg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tdpg/csv.hpp"
#include "tdpg/tdpg.hpp"

namespace tdpg {

namespace {

std::string fmt_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return std::sqrt(sq / static_cast<double>(xs.size() - 1));
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ContractViolation("cannot write '" + path + "'");
    return os;
}

}  // namespace

Histogram make_histogram(const std::vector<double>& values, std::size_t bins, double lo,
                         double hi) {
    require(bins >= 1, "make_histogram: need at least one bin");
    require(hi >= lo, "make_histogram: hi < lo");
    if (hi == lo) hi = lo + 1.0;
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    h.edges[bins] = hi;
    h.counts.assign(bins, 0);
    for (double v : values) {
        const double c = std::clamp(v, lo, hi);
        auto b = static_cast<std::size_t>((c - lo) / (hi - lo) * static_cast<double>(bins));
        if (b >= bins) b = bins - 1;
        ++h.counts[b];
    }
    return h;
}

Histogram make_histogram(const std::vector<double>& values, std::size_t bins) {
    require(!values.empty(), "make_histogram: empty value list");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return make_histogram(values, bins, *lo, *hi);
}

EvalReport evaluate(const PolicyParams& params, const EvalOptions& opt) {
    require(opt.n >= 1, "evaluate: need at least one rollout");
    RolloutOptions ro;
    ro.env = opt.env;
    ro.shift = opt.shift;
    ro.n = opt.n;
    ro.action_clamp = opt.action_clamp;
    ro.threads = opt.threads;
    Rng master(opt.seed);
    const TrajectoryBatch batch =
        rollout_batch(params, ro, master.child(stream::kEval, opt.scenario_index));

    EvalReport rep;
    rep.scenario = opt.scenario;
    rep.n = opt.n;
    rep.costs = batch.total_costs;
    rep.final_dists.resize(opt.n);
    const std::vector<double>& terminal = batch.states[batch.horizon];
    for (std::size_t i = 0; i < opt.n; ++i) {
        const double* row = terminal.data() + i * batch.state_dim;
        rep.final_dists[i] =
            opt.env == EnvId::lava ? std::abs(row[0] - kLavaGoal) : std::abs(row[0] - row[1]);
    }
    rep.cost_mean = mean_of(rep.costs);
    rep.cost_std = sample_std(rep.costs, rep.cost_mean);
    rep.dist_mean = mean_of(rep.final_dists);
    rep.dist_std = sample_std(rep.final_dists, rep.dist_mean);
    rep.hist = make_histogram(rep.costs, opt.bins);
    return rep;
}

RiskEstimate entropic_risk(const std::vector<double>& costs, double beta) {
    require(!costs.empty(), "entropic_risk: empty cost list");
    require(beta > 0.0, "entropic_risk: beta must be positive");
    double m = costs[0];
    for (double c : costs) {
        require(std::isfinite(c), "entropic_risk: non-finite cost");
        m = std::max(m, c);
    }
    // Max-subtracted in cost space, so constant samples pass through exactly.
    double acc = 0.0;
    for (double c : costs) acc += std::exp(beta * (c - m));
    RiskEstimate r;
    r.beta = beta;
    r.n = costs.size();
    r.rho = m + std::log(acc / static_cast<double>(costs.size())) / beta;
    return r;
}

BoundReport bound_diagnostic(const std::vector<std::vector<double>>& stage_costs,
                             const std::vector<double>& mi, double beta) {
    require(!stage_costs.empty(), "bound_diagnostic: no cost samples");
    BoundReport r;
    r.beta = beta;
    for (const auto& ct : stage_costs) r.bound_sum += entropic_risk(ct, beta).rho;
    for (double m : mi) r.bound_sum += m;
    const std::size_t n = stage_costs[0].size();
    std::vector<double> totals(n, 0.0);
    for (const auto& ct : stage_costs) {
        require(ct.size() == n, "bound_diagnostic: ragged cost table");
        for (std::size_t i = 0; i < n; ++i) totals[i] += ct[i];
    }
    r.empirical_cost = mean_of(totals);
    r.gap = r.bound_sum - r.empirical_cost;
    return r;
}

std::string bound_to_string(const BoundReport& r) {
    std::ostringstream os;
    os << r.note << " diagnostic (beta=" << fmt_short(r.beta)
       << "): sum_t (rho_beta[c_t] + I_t) = " << fmt_short(r.bound_sum)
       << " vs empirical E[c] = " << fmt_short(r.empirical_cost) << " (gap "
       << fmt_short(r.gap) << ")";
    return os.str();
}

EvalScenario training_scenario(EnvId env) {
    return {"training",
            env == EnvId::lava ? lava_training_shift() : ballcatch_training_shift()};
}

std::vector<EvalScenario> paper_scenarios(EnvId env) {
    std::vector<EvalScenario> out{training_scenario(env)};
    if (env == EnvId::lava) {
        for (double s2 : {1e-3, 1e-2, 1e-1, 1.0}) {
            EnvShiftSpec shift = lava_training_shift();
            shift.sensor_noise = s2;
            out.push_back({"noise_" + fmt_short(s2), shift});
        }
    } else {
        for (double s : {0.10, 0.15, 0.20, 0.25}) {
            EnvShiftSpec shift = ballcatch_training_shift();
            shift.sensor_noise = s;
            out.push_back({"noise_" + fmt_short(s), shift});
        }
        for (int k = 1; k <= 7; ++k) {
            EnvShiftSpec shift = ballcatch_training_shift();
            shift.texture_id = k;
            out.push_back({"texture_" + std::to_string(k), shift});
        }
    }
    return out;
}

std::vector<EvalScenario> parse_scenario_spec(const std::string& spec, EnvId env) {
    if (spec == "paper") return paper_scenarios(env);
    if (spec == "training") return {training_scenario(env)};
    std::vector<EvalScenario> out;
    std::istringstream is(spec);
    std::string token;
    while (std::getline(is, token, ',')) {
        if (token.empty()) continue;
        const auto colon = token.find(':');
        require(colon != std::string::npos,
                "scenario token '" + token + "' is not kind:value");
        const std::string kind = token.substr(0, colon);
        const std::string value = token.substr(colon + 1);
        EnvShiftSpec shift =
            env == EnvId::lava ? lava_training_shift() : ballcatch_training_shift();
        if (kind == "noise") {
            try {
                shift.sensor_noise = std::stod(value);
            } catch (const std::exception&) {
                throw ContractViolation("scenario noise value '" + value + "' is not a number");
            }
            out.push_back({"noise_" + fmt_short(shift.sensor_noise), shift});
        } else if (kind == "texture") {
            require(env == EnvId::ballcatch, "texture scenarios are ball-catching only");
            try {
                shift.texture_id = std::stoi(value);
            } catch (const std::exception&) {
                throw ContractViolation("scenario texture id '" + value + "' is not an integer");
            }
            require(shift.texture_id >= 0, "scenario texture id must be nonnegative");
            out.push_back({"texture_" + std::to_string(shift.texture_id), shift});
        } else {
            throw ContractViolation("unknown scenario kind '" + kind + "'");
        }
    }
    require(!out.empty(), "empty scenario set");
    return out;
}

void write_eval_csv(const std::vector<EvalReport>& reports, const std::string& path) {
    std::ofstream os = open_out(path);
    os << "scenario,n,cost_mean,cost_std,dist_mean,dist_std\n";
    for (const EvalReport& r : reports)
        os << join_csv({r.scenario, std::to_string(r.n), fmt_double(r.cost_mean),
                        fmt_double(r.cost_std), fmt_double(r.dist_mean),
                        fmt_double(r.dist_std)})
           << "\n";
}

void write_rollouts_csv(const EvalReport& report, const std::string& path) {
    std::ofstream os = open_out(path);
    os << "rollout,cost,final_dist\n";
    for (std::size_t i = 0; i < report.costs.size(); ++i)
        os << i << "," << fmt_double(report.costs[i]) << ","
           << fmt_double(report.final_dists[i]) << "\n";
}

namespace {

void write_hist_svg(const std::string& path, const Histogram& h,
                    const std::vector<std::size_t>& a, const std::string& name_a,
                    const std::vector<std::size_t>* b, const std::string& name_b) {
    const double w = 640, hgt = 400, ml = 55, mr = 15, mt = 30, mb = 45;
    const double pw = w - ml - mr, ph = hgt - mt - mb;
    const std::size_t bins = a.size();
    std::size_t maxc = 1;
    for (std::size_t c : a) maxc = std::max(maxc, c);
    if (b)
        for (std::size_t c : *b) maxc = std::max(maxc, c);

    std::ofstream os = open_out(path);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << hgt
       << "\" viewBox=\"0 0 " << w << " " << hgt << "\">\n";
    os << "<rect width=\"" << w << "\" height=\"" << hgt << "\" fill=\"white\"/>\n";
    auto bars = [&](const std::vector<std::size_t>& counts, const char* color) {
        for (std::size_t i = 0; i < bins; ++i) {
            if (counts[i] == 0) continue;
            const double bw = pw / static_cast<double>(bins);
            const double x = ml + static_cast<double>(i) * bw;
            const double bh =
                ph * static_cast<double>(counts[i]) / static_cast<double>(maxc);
            os << "<rect x=\"" << x << "\" y=\"" << mt + ph - bh << "\" width=\""
               << std::max(bw - 1.0, 1.0) << "\" height=\"" << bh << "\" fill=\"" << color
               << "\" fill-opacity=\"0.65\"/>\n";
        }
    };
    bars(a, "#4878a8");
    if (b) bars(*b, "#c05050");
    os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
       << mt + ph << "\" stroke=\"#333\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
       << "\" stroke=\"#333\"/>\n";
    os << "<text x=\"" << ml << "\" y=\"" << hgt - 12
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << fmt_short(h.edges.front())
       << "</text>\n";
    os << "<text x=\"" << ml + pw << "\" y=\"" << hgt - 12
       << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">"
       << fmt_short(h.edges.back()) << "</text>\n";
    os << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 4
       << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">" << maxc
       << "</text>\n";
    os << "<text x=\"" << ml + 4 << "\" y=\"" << mt - 10
       << "\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#4878a8\">" << name_a
       << "</text>\n";
    if (b)
        os << "<text x=\"" << ml + pw << "\" y=\"" << mt - 10
           << "\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#c05050\""
           << " text-anchor=\"end\">" << name_b << "</text>\n";
    os << "</svg>\n";
}

}  // namespace

void export_histogram(const EvalReport& report, const std::string& path_prefix) {
    const Histogram& h = report.hist;
    std::ofstream os = open_out(path_prefix + ".csv");
    os << "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        os << fmt_double(h.edges[i]) << "," << fmt_double(h.edges[i + 1]) << "," << h.counts[i]
           << "\n";
    write_hist_svg(path_prefix + ".svg", h, h.counts, report.scenario, nullptr, "");
}

void export_histogram_pair(const EvalReport& a, const EvalReport& b, std::size_t bins,
                           const std::string& path_prefix) {
    require(!a.costs.empty() && !b.costs.empty(), "export_histogram_pair: empty cost lists");
    double lo = a.costs[0], hi = a.costs[0];
    for (double c : a.costs) lo = std::min(lo, c), hi = std::max(hi, c);
    for (double c : b.costs) lo = std::min(lo, c), hi = std::max(hi, c);
    const Histogram ha = make_histogram(a.costs, bins, lo, hi);
    const Histogram hb = make_histogram(b.costs, bins, lo, hi);
    std::ofstream os = open_out(path_prefix + ".csv");
    os << "bin_lo,bin_hi,count_a,count_b\n";
    for (std::size_t i = 0; i < bins; ++i)
        os << fmt_double(ha.edges[i]) << "," << fmt_double(ha.edges[i + 1]) << ","
           << ha.counts[i] << "," << hb.counts[i] << "\n";
    write_hist_svg(path_prefix + ".svg", ha, ha.counts, a.scenario, &hb.counts, b.scenario);
}

}  // namespace tdpg
