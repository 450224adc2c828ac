#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tdpg/checkpoint.hpp"
#include "tdpg/config.hpp"
#include "tdpg/csv.hpp"
#include "tdpg/eval.hpp"
#include "tdpg/mine.hpp"
#include "tdpg/render.hpp"
#include "tdpg/tdpg.hpp"
#include "tdpg/threading.hpp"

namespace fs = std::filesystem;
using namespace tdpg;

namespace {

unsigned threads_from_env() {
    const char* s = std::getenv("TDPG_THREADS");
    if (!s) return hardware_threads();
    try {
        const unsigned long v = std::stoul(s);
        require(v >= 1, "TDPG_THREADS must be >= 1");
        return static_cast<unsigned>(v);
    } catch (const ContractViolation&) {
        throw;
    } catch (const std::exception&) {
        throw ContractViolation(std::string("TDPG_THREADS is not a number: '") + s + "'");
    }
}

// Leftover tokens become config overrides: --key value or --key=value.
std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& extras) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& tok = extras[i];
        if (tok.rfind("--", 0) != 0)
            throw ContractViolation("unexpected argument '" + tok +
                                    "' (overrides are --key value)");
        const std::string body = tok.substr(2);
        const auto eq = body.find('=');
        if (eq != std::string::npos) {
            pairs.emplace_back(body.substr(0, eq), body.substr(eq + 1));
        } else {
            if (i + 1 >= extras.size())
                throw ContractViolation("option '--" + body + "' is missing a value");
            pairs.emplace_back(body, extras[++i]);
        }
    }
    return pairs;
}

RunConfig resolve(const std::string& config_file,
                  const std::vector<std::pair<std::string, std::string>>& overrides) {
    std::string text;
    std::string origin = "<none>";
    if (!config_file.empty()) {
        std::ifstream is(config_file);
        if (!is) throw ContractViolation("cannot open config file '" + config_file + "'");
        std::ostringstream buf;
        buf << is.rdbuf();
        text = buf.str();
        origin = config_file;
    }
    RunConfig cfg = resolve_config(text, origin, overrides);
    if (!cfg.env_set) throw ContractViolation("--env is required (lava or ballcatch)");
    return cfg;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ContractViolation("cannot write '" + path + "'");
    os << content;
}

void print_epoch(const EpochRecord& r) {
    double mi_sum = 0.0;
    for (double m : r.mi) mi_sum += m;
    std::printf("epoch %4zu  cost %10.4f +- %-10.4f mi_sum %9.5f  j_hat %10.5f\n", r.epoch,
                r.cost_mean, r.cost_std, mi_sum, r.j_hat);
    std::fflush(stdout);
}

int cmd_train(const std::string& config_file,
              const std::vector<std::pair<std::string, std::string>>& overrides,
              unsigned threads, bool quiet) {
    RunConfig cfg = resolve(config_file, overrides);
    cfg.train.threads = threads;
    fs::create_directories(cfg.train.run_dir());
    write_file(cfg.train.run_dir() + "/manifest.txt", serialize_config(cfg, "train"));
    if (!quiet) cfg.train.on_epoch = print_epoch;
    const TrainResult res = train(cfg.train);
    const EpochRecord& last = res.records.back();
    std::printf("done: %zu epochs, final cost %.4f +- %.4f, j_hat %.5f\n", res.records.size(),
                last.cost_mean, last.cost_std, last.j_hat);
    std::printf("records: %s/records.csv\n", cfg.train.run_dir().c_str());
    return 0;
}

int cmd_sweep(const std::string& config_file,
              const std::vector<std::pair<std::string, std::string>>& overrides,
              unsigned threads, bool quiet) {
    RunConfig cfg = resolve(config_file, overrides);
    cfg.train.threads = threads;
    cfg.train.algo = Algo::tdpg;  // a sweep trains and selects tdpg policies
    if (cfg.betas.empty()) cfg.betas = default_beta_sweep(cfg.train.env);
    for (std::size_t i = 0; i < cfg.betas.size(); ++i)
        for (std::size_t j = i + 1; j < cfg.betas.size(); ++j)
            require(cfg.betas[i] != cfg.betas[j], "sweep: duplicate beta values");

    const std::string sweep_dir = cfg.train.run_dir();
    fs::create_directories(sweep_dir);
    write_file(sweep_dir + "/manifest.txt", serialize_config(cfg, "sweep"));

    const std::string base_label = cfg.train.label;
    std::vector<SweepCandidate> candidates;
    std::vector<std::string> run_dirs;
    for (std::size_t i = 0; i < cfg.betas.size(); ++i) {
        TrainConfig tc = cfg.train;
        tc.beta = cfg.betas[i];
        tc.label = base_label + "/beta" + std::to_string(i);
        if (!quiet) {
            std::printf("=== beta = %.17g (%zu/%zu) -> %s\n", tc.beta, i + 1,
                        cfg.betas.size(), tc.run_dir().c_str());
            tc.on_epoch = print_epoch;
        }
        const TrainResult res = train(tc);
        run_dirs.push_back(tc.run_dir());
        for (const EpochRecord& r : res.records) candidates.push_back({tc.beta, r});
    }

    // Per-beta bests for the summary, then the global pick.
    std::ofstream summary(sweep_dir + "/sweep_summary.csv", std::ios::trunc);
    summary << "beta,run_dir,feasible_epochs,best_epoch,best_cost_mean,best_mi_sum\n";
    for (std::size_t i = 0; i < cfg.betas.size(); ++i) {
        std::vector<SweepCandidate> mine;
        for (const SweepCandidate& c : candidates)
            if (c.beta == cfg.betas[i]) mine.push_back(c);
        std::size_t feasible = 0;
        for (const SweepCandidate& c : mine)
            if (!c.record.checkpoint_file.empty() && c.record.cost_mean <= cfg.train.cost_cap)
                ++feasible;
        summary << fmt_double(cfg.betas[i]) << "," << run_dirs[i] << "," << feasible;
        try {
            const Selection best = select_policy(mine, cfg.train.cost_cap);
            summary << "," << best.record.epoch << "," << fmt_double(best.record.cost_mean)
                    << "," << fmt_double(best.mi_sum) << "\n";
        } catch (const InfeasibleSweep&) {
            summary << ",,,\n";
        }
    }
    summary.close();

    const Selection sel = select_policy(candidates, cfg.train.cost_cap);
    std::size_t which = 0;
    while (cfg.betas[which] != sel.beta) ++which;
    const std::string chosen = run_dirs[which] + "/" + sel.record.checkpoint_file;
    std::ostringstream out;
    out << "checkpoint = " << chosen << "\n";
    out << "beta = " << fmt_double(sel.beta) << "\n";
    out << "epoch = " << sel.record.epoch << "\n";
    out << "cost_mean = " << fmt_double(sel.record.cost_mean) << "\n";
    out << "mi_sum = " << fmt_double(sel.mi_sum) << "\n";
    write_file(sweep_dir + "/selected.txt", out.str());
    std::printf("selected beta=%.17g epoch=%zu cost=%.4f mi_sum=%.5f\n", sel.beta,
                sel.record.epoch, sel.record.cost_mean, sel.mi_sum);
    std::printf("selected checkpoint: %s\n", chosen.c_str());
    return 0;
}

PolicyParams load_policy(const RunConfig& cfg, const std::string& path) {
    PolicyParams params = build_policy(cfg.train);
    assign_blocks(params.blocks(), load_checkpoint(path));
    return params;
}

int cmd_eval(const std::string& config_file,
             const std::vector<std::pair<std::string, std::string>>& overrides,
             unsigned threads) {
    RunConfig cfg = resolve(config_file, overrides);
    require(!cfg.checkpoint.empty(), "eval: --checkpoint is required");
    const std::vector<EvalScenario> scenarios =
        parse_scenario_spec(cfg.scenarios, cfg.train.env);

    const PolicyParams params = load_policy(cfg, cfg.checkpoint);
    PolicyParams compare_params;
    if (!cfg.compare.empty()) compare_params = load_policy(cfg, cfg.compare);

    const std::string eval_dir = cfg.train.run_dir() + "/eval";
    fs::create_directories(eval_dir);
    write_file(eval_dir + "/manifest.txt", serialize_config(cfg, "eval"));

    std::vector<EvalReport> reports;
    std::printf("%-14s %6s %12s %12s %10s %10s\n", "scenario", "n", "cost_mean", "cost_std",
                "dist_mean", "rho_beta");
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        EvalOptions opt;
        opt.env = cfg.train.env;
        opt.shift = scenarios[i].shift;
        opt.scenario = scenarios[i].name;
        opt.scenario_index = i;
        opt.n = cfg.eval_rollouts;
        opt.seed = cfg.eval_seed;
        opt.action_clamp = cfg.train.action_clamp;
        opt.bins = cfg.bins;
        opt.threads = threads;
        EvalReport rep = evaluate(params, opt);
        const double rho = entropic_risk(rep.costs, cfg.train.beta).rho;
        std::printf("%-14s %6zu %12.4f %12.4f %10.4f %10.4f\n", rep.scenario.c_str(), rep.n,
                    rep.cost_mean, rep.cost_std, rep.dist_mean, rho);
        std::fflush(stdout);
        write_rollouts_csv(rep, eval_dir + "/rollouts_" + rep.scenario + ".csv");
        export_histogram(rep, eval_dir + "/hist_" + rep.scenario);
        if (!cfg.compare.empty()) {
            EvalReport cmp = evaluate(compare_params, opt);
            EvalReport a = rep, b = cmp;
            a.scenario += " (policy)";
            b.scenario += " (compare)";
            export_histogram_pair(a, b, cfg.bins, eval_dir + "/hist_pair_" + rep.scenario);
        }
        reports.push_back(std::move(rep));
    }
    write_eval_csv(reports, eval_dir + "/eval.csv");
    std::printf("reports: %s/eval.csv\n", eval_dir.c_str());
    return 0;
}

int cmd_render_debug(const std::string& env_name, const std::string& state_spec, int texture,
                     double noise, std::size_t size, std::uint64_t seed,
                     const std::string& out_file) {
    require(env_from_string(env_name) == EnvId::ballcatch,
            "render-debug: only ballcatch renders images");
    require(texture >= 0, "render-debug: texture id must be nonnegative");
    BallCatchState s;
    s.d = 0.0;
    if (!state_spec.empty()) {
        std::istringstream is(state_spec);
        std::string tok;
        std::vector<double> vals;
        while (std::getline(is, tok, ',')) vals.push_back(std::stod(tok));
        require(vals.size() == 5, "render-debug: state is d,bx,by,vx,vy");
        s = {vals[0], vals[1], vals[2], vals[3], vals[4]};
    }
    EnvShiftSpec shift;
    shift.texture_id = texture;
    shift.sensor_noise = noise;
    std::vector<double> rgb(3 * size * size);
    Rng rng(seed);
    ballcatch_render(s, shift, size, rng, rgb.data());
    write_ppm(out_file, rgb.data(), size);
    std::printf("wrote %s (%zux%zu, texture %d)\n", out_file.c_str(), size, size, texture);
    return 0;
}

int cmd_mine_selftest(std::uint64_t seed) {
    const std::vector<MineSelftestCase> cases = mine_gaussian_selftest(seed);
    bool ok = true;
    for (const MineSelftestCase& c : cases) {
        std::printf("rho=%.2f  target %.4f  estimate %.4f  tolerance %.2f  %s\n", c.rho,
                    c.target, c.estimate, c.tolerance, c.pass ? "ok" : "FAIL");
        ok = ok && c.pass;
    }
    if (!ok) {
        std::fprintf(stderr, "mine-selftest: estimates out of tolerance\n");
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Task-driven control policies with an information bottleneck"};
    app.require_subcommand(1);

    std::string config_file;
    bool quiet = false;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "key=value config file (see README)");
        sub->add_flag("--quiet", quiet, "suppress per-epoch output");
        sub->allow_extras();
        sub->footer("Any config key is also accepted as --key value.");
    };
    CLI::App* t = app.add_subcommand("train", "Train one policy (pg or tdpg)");
    add_common(t);
    CLI::App* s = app.add_subcommand("sweep", "Train tdpg across betas and select a policy");
    add_common(s);
    CLI::App* e = app.add_subcommand("eval", "Evaluate a checkpoint under test scenarios");
    add_common(e);

    CLI::App* r = app.add_subcommand("render-debug", "Write one rendered frame as PPM");
    std::string r_env = "ballcatch", r_state, r_out = "frame.ppm";
    int r_texture = 0;
    double r_noise = 0.0;
    std::size_t r_size = 64;
    std::uint64_t r_seed = 0;
    r->add_option("--env", r_env, "environment (only ballcatch renders)");
    r->add_option("--state", r_state, "d,bx,by,vx,vy (default: training initial state)");
    r->add_option("--texture", r_texture, "backdrop texture id");
    r->add_option("--noise", r_noise, "per-pixel noise std");
    r->add_option("--size", r_size, "image side length");
    r->add_option("--seed", r_seed, "noise seed");
    r->add_option("--out", r_out, "output PPM path");

    CLI::App* m = app.add_subcommand("mine-selftest", "Gaussian mutual-information oracle");
    std::uint64_t m_seed = 0;
    m->add_option("--seed", m_seed, "selftest seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return 1;
    }

    try {
        const unsigned threads = threads_from_env();
        if (t->parsed()) return cmd_train(config_file, parse_overrides(t->remaining()), threads, quiet);
        if (s->parsed()) return cmd_sweep(config_file, parse_overrides(s->remaining()), threads, quiet);
        if (e->parsed()) return cmd_eval(config_file, parse_overrides(e->remaining()), threads);
        if (r->parsed())
            return cmd_render_debug(r_env, r_state, r_texture, r_noise, r_size, r_seed, r_out);
        if (m->parsed()) return cmd_mine_selftest(m_seed);
    } catch (const InfeasibleSweep& err) {
        std::fprintf(stderr, "infeasible sweep: %s\n", err.what());
        return 3;
    } catch (const ContractViolation& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 1;
    } catch (const std::exception& err) {
        std::fprintf(stderr, "failure: %s\n", err.what());
        return 2;
    }
    return 1;
}
