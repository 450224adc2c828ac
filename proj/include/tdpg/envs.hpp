#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tdpg/rng.hpp"

namespace tdpg {

enum class EnvId { lava, ballcatch };

EnvId env_from_string(const std::string& s);
std::string env_to_string(EnvId id);

// Double integrator on a line segment: a wall at d=0 (inelastic stop) and
// lava past d=5 (absorbing). Goal g = [3, 0].
struct LavaState {
    double d = 0.0;
    double v = 0.0;
    bool frozen = false;  // entered the lava; state no longer responds to actions
};

// Ball-catching: robot slides on the x-axis with commanded velocity u while
// the ball flies ballistically. dt = 1/15 s, g = 9.81 m/s^2.
struct BallCatchState {
    double d = 0.0;   // robot x
    double bx = 8.0;  // ball position
    double by = 1.0;
    double vx = -4.5;  // ball velocity
    double vy = 7.85;
};

// Test-time perturbation of the sensing or initial-condition distribution.
// sensor_noise is the observation noise variance for lava and the per-pixel
// standard deviation for ball-catching.
struct EnvShiftSpec {
    double sensor_noise = 0.0;
    int texture_id = 0;  // 0 = training brick; 1..7 fixed test backdrops; >= 8 seeded variants
    double init_lo = 0.0;  // uniform initial-position interval (lava d0 / ball robot d0)
    double init_hi = 0.0;
};

EnvShiftSpec lava_training_shift();       // sigma^2 = 1e-4, d0 ~ U[0, 5]
EnvShiftSpec ballcatch_training_shift();  // noise-free render, d0 ~ U[-2, 2]

LavaState lava_step(const LavaState& s, double u);
// y ~ N([d, v], sigma2 * I)
void lava_observe(const LavaState& s, double sigma2, Rng& rng, double out[2]);
// ||x_t - g||_2, weighted 100x at the terminal step t == T.
double lava_cost(const LavaState& s, std::size_t t, std::size_t T);

BallCatchState ballcatch_step(const BallCatchState& s, double u);
// 0.01 * |u_t| per stage; 100 * |d_T - bx_T| at the terminal step.
double ballcatch_cost(const BallCatchState& s, double u, std::size_t t, std::size_t T);

// Draws an initial state: position uniform over [init_lo, init_hi], all
// other components at their fixed training values.
LavaState lava_sample_initial(const EnvShiftSpec& shift, Rng& rng);
BallCatchState ballcatch_sample_initial(const EnvShiftSpec& shift, Rng& rng);

constexpr double kBallDt = 1.0 / 15.0;
constexpr double kBallGravity = 9.81;
constexpr double kLavaGoal = 3.0;
constexpr double kTerminalWeight = 100.0;
constexpr double kBallEffortWeight = 0.01;

// N rollouts over horizon T, stored as row-major [n x dim] matrices per
// timestep. states has T+1 entries; obs/trvs/eps/actions have T; stage_costs
// has T+1 (the last entry is the terminal cost). actions holds the sampled
// (pre-clamp) controls, which is what the policy log-density is evaluated at.
struct TrajectoryBatch {
    std::size_t n = 0, horizon = 0;
    std::size_t state_dim = 0, obs_dim = 0, trv_dim = 0, action_dim = 0;
    std::vector<std::vector<double>> states;
    std::vector<std::vector<double>> obs;
    std::vector<std::vector<double>> trvs;
    std::vector<std::vector<double>> eps;
    std::vector<std::vector<double>> actions;
    std::vector<std::vector<double>> stage_costs;  // [T+1][n]
    std::vector<double> total_costs;               // [n]
};

}  // namespace tdpg
