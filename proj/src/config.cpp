#include "tdpg/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "tdpg/csv.hpp"

namespace tdpg {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
    throw ContractViolation(where + ": " + msg);
}

double to_double(const std::string& v, const std::string& where) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        fail(where, "expected a number, got '" + v + "'");
    }
}

std::uint64_t to_u64(const std::string& v, const std::string& where) {
    try {
        std::size_t used = 0;
        const std::uint64_t u = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return u;
    } catch (const std::exception&) {
        fail(where, "expected a nonnegative integer, got '" + v + "'");
    }
}

std::size_t to_size(const std::string& v, const std::string& where) {
    return static_cast<std::size_t>(to_u64(v, where));
}

bool to_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(where, "expected true/false, got '" + v + "'");
}

std::vector<double> to_double_list(const std::string& v, const std::string& where) {
    std::vector<double> out;
    std::string cur;
    std::istringstream is(v);
    while (std::getline(is, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(to_double(cur, where));
    }
    return out;
}

std::string join_doubles(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        out += fmt_double(xs[i]);
    }
    return out;
}

struct KeySpec {
    const char* section;
    const char* key;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

void set_env(RunConfig& cfg, const std::string& value, const std::string& where) {
    EnvId id;
    try {
        id = env_from_string(value);
    } catch (const ContractViolation& e) {
        fail(where, e.what());
    }
    if (!cfg.env_set || id != cfg.train.env) cfg.train = default_config(id);
    cfg.env_set = true;
}

const std::vector<KeySpec>& registry() {
    auto num = [](double TrainConfig::* f) {
        return KeySpec{"", "",
                       [f](RunConfig& c, const std::string& v, const std::string& w) {
                           c.train.*f = to_double(v, w);
                       },
                       [f](const RunConfig& c) { return fmt_double(c.train.*f); }};
    };
    auto count = [](std::size_t TrainConfig::* f) {
        return KeySpec{"", "",
                       [f](RunConfig& c, const std::string& v, const std::string& w) {
                           c.train.*f = to_size(v, w);
                       },
                       [f](const RunConfig& c) { return std::to_string(c.train.*f); }};
    };
    auto flag = [](bool TrainConfig::* f) {
        return KeySpec{"", "",
                       [f](RunConfig& c, const std::string& v, const std::string& w) {
                           c.train.*f = to_bool(v, w);
                       },
                       [f](const RunConfig& c) { return c.train.*f ? "true" : "false"; }};
    };
    auto text = [](std::string TrainConfig::* f) {
        return KeySpec{"", "",
                       [f](RunConfig& c, const std::string& v, const std::string&) {
                           c.train.*f = v;
                       },
                       [f](const RunConfig& c) { return c.train.*f; }};
    };
    auto shift_num = [](double EnvShiftSpec::* f) {
        return KeySpec{"", "",
                       [f](RunConfig& c, const std::string& v, const std::string& w) {
                           c.train.shift.*f = to_double(v, w);
                       },
                       [f](const RunConfig& c) { return fmt_double(c.train.shift.*f); }};
    };
    auto named = [](KeySpec spec, const char* section, const char* key) {
        spec.section = section;
        spec.key = key;
        return spec;
    };

    static const std::vector<KeySpec> keys = [&] {
        std::vector<KeySpec> r;
        r.push_back({"train", "algo",
                     [](RunConfig& c, const std::string& v, const std::string& w) {
                         try {
                             c.train.algo = algo_from_string(v);
                         } catch (const ContractViolation& e) {
                             fail(w, e.what());
                         }
                     },
                     [](const RunConfig& c) { return algo_to_string(c.train.algo); }});
        r.push_back(named(num(&TrainConfig::beta), "train", "beta"));
        r.push_back({"train", "betas",
                     [](RunConfig& c, const std::string& v, const std::string& w) {
                         c.betas = to_double_list(v, w);
                     },
                     [](const RunConfig& c) { return join_doubles(c.betas); }});
        r.push_back(named(count(&TrainConfig::rollouts), "train", "rollouts"));
        r.push_back(named(count(&TrainConfig::mine_minibatch), "train", "mine_minibatch"));
        r.push_back(named(num(&TrainConfig::lr_policy), "train", "lr_policy"));
        r.push_back(named(num(&TrainConfig::lr_mine), "train", "lr_mine"));
        r.push_back(named(count(&TrainConfig::epochs), "train", "epochs"));
        r.push_back(named(count(&TrainConfig::mine_epochs), "train", "mine_epochs"));
        r.push_back(named(count(&TrainConfig::mine_epochs_first), "train", "mine_epochs_first"));
        r.push_back(named(num(&TrainConfig::ema_alpha), "train", "ema_alpha"));
        r.push_back(named(num(&TrainConfig::value_ema_alpha), "train", "value_ema_alpha"));
        r.push_back(named(flag(&TrainConfig::use_value_ema), "train", "use_value_ema"));
        r.push_back(named(num(&TrainConfig::cost_cap), "train", "cost_cap"));
        r.push_back({"train", "seed",
                     [](RunConfig& c, const std::string& v, const std::string& w) {
                         c.train.seed = to_u64(v, w);
                     },
                     [](const RunConfig& c) { return std::to_string(c.train.seed); }});
        r.push_back(named(count(&TrainConfig::horizon), "train", "horizon"));
        r.push_back(named(count(&TrainConfig::trv_dim), "train", "trv_dim"));
        r.push_back(named(count(&TrainConfig::mine_hidden), "train", "mine_hidden"));
        r.push_back(named(flag(&TrainConfig::time_varying), "train", "time_varying"));
        r.push_back(named(num(&TrainConfig::action_clamp), "train", "action_clamp"));
        r.push_back(named(flag(&TrainConfig::baseline), "train", "baseline"));
        r.push_back(named(flag(&TrainConfig::reward_to_go), "train", "reward_to_go"));
        r.push_back(named(flag(&TrainConfig::terminal_mi), "train", "terminal_mi"));
        r.push_back(named(num(&TrainConfig::grad_clip), "train", "grad_clip"));
        r.push_back(named(count(&TrainConfig::checkpoint_every), "train", "checkpoint_every"));
        r.push_back(named(count(&TrainConfig::mine_log_every), "train", "mine_log_every"));
        r.push_back(named(flag(&TrainConfig::early_stop), "train", "early_stop"));
        r.push_back(named(text(&TrainConfig::warm_start), "train", "warm_start"));
        r.push_back(named(text(&TrainConfig::out_dir), "train", "out_dir"));
        r.push_back(named(text(&TrainConfig::label), "train", "label"));

        r.push_back({"env", "env", set_env,
                     [](const RunConfig& c) { return env_to_string(c.train.env); }});
        r.push_back(named(shift_num(&EnvShiftSpec::sensor_noise), "env", "sensor_noise"));
        r.push_back({"env", "texture_id",
                     [](RunConfig& c, const std::string& v, const std::string& w) {
                         c.train.shift.texture_id = static_cast<int>(to_u64(v, w));
                     },
                     [](const RunConfig& c) {
                         return std::to_string(c.train.shift.texture_id);
                     }});
        r.push_back(named(shift_num(&EnvShiftSpec::init_lo), "env", "init_lo"));
        r.push_back(named(shift_num(&EnvShiftSpec::init_hi), "env", "init_hi"));
        r.push_back(named(count(&TrainConfig::image_size), "env", "image_size"));

        r.push_back({"eval", "checkpoint",
                     [](RunConfig& c, const std::string& v, const std::string&) {
                         c.checkpoint = v;
                     },
                     [](const RunConfig& c) { return c.checkpoint; }});
        r.push_back({"eval", "compare",
                     [](RunConfig& c, const std::string& v, const std::string&) {
                         c.compare = v;
                     },
                     [](const RunConfig& c) { return c.compare; }});
        r.push_back({"eval", "scenarios",
                     [](RunConfig& c, const std::string& v, const std::string&) {
                         c.scenarios = v;
                     },
                     [](const RunConfig& c) { return c.scenarios; }});
        r.push_back({"eval", "eval_rollouts",
                     [](RunConfig& c, const std::string& v, const std::string& w) {
                         c.eval_rollouts = to_size(v, w);
                     },
                     [](const RunConfig& c) { return std::to_string(c.eval_rollouts); }});
        r.push_back({"eval", "eval_seed",
                     [](RunConfig& c, const std::string& v, const std::string& w) {
                         c.eval_seed = to_u64(v, w);
                     },
                     [](const RunConfig& c) { return std::to_string(c.eval_seed); }});
        r.push_back({"eval", "bins",
                     [](RunConfig& c, const std::string& v, const std::string& w) {
                         c.bins = to_size(v, w);
                     },
                     [](const RunConfig& c) { return std::to_string(c.bins); }});
        return r;
    }();
    return keys;
}

const KeySpec* find_key(const std::string& key) {
    for (const KeySpec& s : registry())
        if (key == s.key) return &s;
    return nullptr;
}

struct Line {
    std::size_t number;
    std::string section;
    std::string key, value;
};

std::vector<Line> tokenize(const std::string& text, const std::string& origin) {
    std::vector<Line> out;
    std::istringstream is(text);
    std::string raw;
    std::string section;
    std::size_t number = 0;
    while (std::getline(is, raw)) {
        ++number;
        const std::string where = origin + ":" + std::to_string(number);
        std::string line = raw;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(where, "malformed section header '" + raw + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "train" && section != "env" && section != "eval")
                fail(where, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(where, "expected key = value, got '" + raw + "'");
        if (section.empty()) fail(where, "key before any section header");
        out.push_back({number, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
    }
    return out;
}

void apply_line(RunConfig& cfg, const Line& l, const std::string& origin) {
    const std::string where = origin + ":" + std::to_string(l.number);
    const KeySpec* spec = find_key(l.key);
    if (!spec) fail(where, "unknown key '" + l.key + "'");
    if (l.section != spec->section)
        fail(where, "key '" + l.key + "' belongs to [" + spec->section + "], not [" +
                        l.section + "]");
    spec->set(cfg, l.value, where);
}

}  // namespace

RunConfig resolve_config(const std::string& file_text, const std::string& origin,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg;
    const std::vector<Line> lines = tokenize(file_text, origin);

    // The environment decides the [train] defaults, so it resolves first;
    // an override beats the file.
    std::string env_value, env_where;
    for (const Line& l : lines) {
        if (l.key != "env") continue;
        const std::string where = origin + ":" + std::to_string(l.number);
        if (l.section != "env") fail(where, "key 'env' belongs to [env], not [" + l.section + "]");
        if (!env_value.empty() && l.value != env_value)
            fail(where, "conflicting env values '" + env_value + "' and '" + l.value + "'");
        env_value = l.value;
        env_where = where;
    }
    for (const auto& [k, v] : overrides) {
        if (k == "env") {
            env_value = v;
            env_where = "--env";
        }
    }
    if (!env_value.empty()) set_env(cfg, env_value, env_where);

    for (const Line& l : lines)
        if (l.key != "env") apply_line(cfg, l, origin);
    for (const auto& [k, v] : overrides)
        if (k != "env") apply_override(cfg, k, v);
    return cfg;
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    return resolve_config(text, origin, {});
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ContractViolation("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str(), path);
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    const std::string where = "--" + key;
    const KeySpec* spec = find_key(key);
    if (!spec) fail(where, "unknown key '" + key + "'");
    spec->set(cfg, value, where);
}

std::string serialize_config(const RunConfig& cfg, const std::string& command) {
    std::ostringstream os;
    os << "# " << kVersionString << "\n";
    os << "# command: " << command << "\n";
    std::string section;
    for (const KeySpec& s : registry()) {
        if (section != s.section) {
            section = s.section;
            os << "\n[" << section << "]\n";
        }
        os << s.key << " = " << s.get(cfg) << "\n";
    }
    return os.str();
}

}  // namespace tdpg
