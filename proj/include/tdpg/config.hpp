#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tdpg/tdpg.hpp"

namespace tdpg {

constexpr const char* kVersionString = "tdpg 1.0.0";

// Everything a run needs, resolvable from a config file plus command-line
// overrides. The [train] defaults reproduce the lava benchmark; selecting
// an environment resets them to that benchmark's published values.
struct RunConfig {
    TrainConfig train = default_config(EnvId::lava);
    std::vector<double> betas;  // sweep list; empty = environment default

    // [eval]
    std::string checkpoint;
    std::string compare;  // optional second checkpoint for paired histograms
    std::string scenarios = "paper";
    std::size_t eval_rollouts = 1000;
    std::uint64_t eval_seed = 0;
    std::size_t bins = 30;

    bool env_set = false;  // an explicit env key was seen
};

// Flat key=value text with [train], [env], [eval] sections. '#' starts a
// comment; keys are unique across sections and bound to one section each;
// unknown keys, unknown sections, and keys in the wrong section are hard
// errors naming the offending line. The env key is resolved first (wherever
// it appears), so key order never matters.
RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig load_config_file(const std::string& path);

// File text (may be empty) plus ordered sectionless overrides, e.g. from
// `--key value` arguments. An env override wins over the file's env key and
// is applied before everything else.
RunConfig resolve_config(const std::string& file_text, const std::string& origin,
                         const std::vector<std::pair<std::string, std::string>>& overrides);

// Single sectionless assignment. Setting "env" resets the [train] section
// to that environment's defaults, so set it before other keys.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Round-trippable manifest: version and command comments, then every key in
// its section. Reparsing reproduces cfg exactly.
std::string serialize_config(const RunConfig& cfg, const std::string& command);

}  // namespace tdpg
