#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tdpg/envs.hpp"
#include "tdpg/rng.hpp"

namespace tdpg {

// Orthographic side view covering x in [-3, 9] m, y in [0, 8] m. The frame
// is channel-planar RGB (3 * size * size doubles) with values in [0, 1]:
// backdrop texture, then the ball (disc, radius 0.25 m) and the robot
// (0.5 x 0.3 m rectangle on the ground) composited with 4x4 subpixel
// coverage, then optional per-pixel Gaussian noise of std sensor_noise
// (drawn per channel) followed by clamping back to [0, 1].
void ballcatch_render(const BallCatchState& s, const EnvShiftSpec& shift, std::size_t image_size,
                      Rng& rng, double* out);

// Backdrop color only, no sprites, no noise. Used for texture diagnostics.
void render_backdrop(int texture_id, std::size_t image_size, double* out);

constexpr double kCamXLo = -3.0, kCamXHi = 9.0;
constexpr double kCamYLo = 0.0, kCamYHi = 8.0;
constexpr double kBallRadius = 0.25;
constexpr double kRobotHalfWidth = 0.25, kRobotHeight = 0.3;
constexpr int kMaxFixedTexture = 7;

// Binary P6 image, 8 bits per channel.
void write_ppm(const std::string& path, const double* rgb, std::size_t image_size);

}  // namespace tdpg
