#include "tdpg/envs.hpp"

#include <cmath>

namespace tdpg {

EnvId env_from_string(const std::string& s) {
    if (s == "lava") return EnvId::lava;
    if (s == "ballcatch") return EnvId::ballcatch;
    throw ContractViolation("unknown env '" + s + "' (expected lava or ballcatch)");
}

std::string env_to_string(EnvId id) { return id == EnvId::lava ? "lava" : "ballcatch"; }

EnvShiftSpec lava_training_shift() {
    EnvShiftSpec s;
    s.sensor_noise = 1e-4;
    s.init_lo = 0.0;
    s.init_hi = 5.0;
    return s;
}

EnvShiftSpec ballcatch_training_shift() {
    EnvShiftSpec s;
    s.sensor_noise = 0.0;
    s.texture_id = 0;
    s.init_lo = -2.0;
    s.init_hi = 2.0;
    return s;
}

LavaState lava_step(const LavaState& s, double u) {
    require(std::isfinite(u), "lava_step: non-finite control");
    if (s.frozen) return s;
    LavaState n;
    n.d = s.d + s.v;
    n.v = s.v + u;
    if (n.d < 0.0) {
        n.d = 0.0;
        n.v = 0.0;
    }
    if (n.d > 5.0) {  // fell in: frozen with whatever velocity it hit at
        n.d = 5.0;
        n.frozen = true;
    }
    return n;
}

void lava_observe(const LavaState& s, double sigma2, Rng& rng, double out[2]) {
    require(sigma2 >= 0.0, "lava_observe: negative noise variance");
    const double sigma = std::sqrt(sigma2);
    out[0] = s.d + sigma * rng.normal();
    out[1] = s.v + sigma * rng.normal();
}

double lava_cost(const LavaState& s, std::size_t t, std::size_t T) {
    const double dd = s.d - kLavaGoal;
    const double dist = std::sqrt(dd * dd + s.v * s.v);
    return t == T ? kTerminalWeight * dist : dist;
}

BallCatchState ballcatch_step(const BallCatchState& s, double u) {
    require(std::isfinite(u), "ballcatch_step: non-finite control");
    BallCatchState n;
    n.d = s.d + kBallDt * u;
    n.bx = s.bx + kBallDt * s.vx;
    n.by = s.by + kBallDt * s.vy;
    n.vx = s.vx;
    n.vy = s.vy - kBallDt * kBallGravity;
    return n;
}

double ballcatch_cost(const BallCatchState& s, double u, std::size_t t, std::size_t T) {
    if (t == T) return kTerminalWeight * std::fabs(s.d - s.bx);
    return kBallEffortWeight * std::fabs(u);
}

LavaState lava_sample_initial(const EnvShiftSpec& shift, Rng& rng) {
    LavaState s;
    s.d = rng.uniform(shift.init_lo, shift.init_hi);
    s.v = 0.0;
    return s;
}

BallCatchState ballcatch_sample_initial(const EnvShiftSpec& shift, Rng& rng) {
    BallCatchState s;  // ball launch state is fixed by the task
    s.d = rng.uniform(shift.init_lo, shift.init_hi);
    return s;
}

}  // namespace tdpg
