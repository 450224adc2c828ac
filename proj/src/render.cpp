#include "tdpg/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace tdpg {

namespace {

struct Color {
    double r, g, b;
};

// Deterministic [0,1) hash of integer lattice coordinates and a stream tag.
double hash01(std::int64_t x, std::int64_t y, std::int64_t tag) {
    std::uint64_t h = static_cast<std::uint64_t>(x) * 0x9e3779b97f4a7c15ull;
    h ^= static_cast<std::uint64_t>(y) + 0xbf58476d1ce4e5b9ull + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(tag) * 0x94d049bb133111ebull;
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebull;
    h ^= h >> 31;
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Bilinear value noise over a square lattice.
double value_noise(double x, double y, double cell, std::int64_t tag) {
    const double fx = x / cell, fy = y / cell;
    const std::int64_t ix = static_cast<std::int64_t>(std::floor(fx));
    const std::int64_t iy = static_cast<std::int64_t>(std::floor(fy));
    const double tx = fx - static_cast<double>(ix);
    const double ty = fy - static_cast<double>(iy);
    const double v00 = hash01(ix, iy, tag), v10 = hash01(ix + 1, iy, tag);
    const double v01 = hash01(ix, iy + 1, tag), v11 = hash01(ix + 1, iy + 1, tag);
    return (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
}

// Brick courses of the given height/width, alternate rows offset by half a
// brick, thin mortar joints between.
Color brick(double x, double y, double bw, double bh, Color face, Color mortar,
            std::int64_t tag) {
    const double mortar_w = 0.06;
    const std::int64_t row = static_cast<std::int64_t>(std::floor(y / bh));
    const double xo = (row % 2 == 0) ? 0.0 : bw * 0.5;
    const std::int64_t col = static_cast<std::int64_t>(std::floor((x + xo) / bw));
    const double lx = (x + xo) - static_cast<double>(col) * bw;
    const double ly = y - static_cast<double>(row) * bh;
    if (lx < mortar_w || ly < mortar_w) return mortar;
    const double shade = 0.85 + 0.3 * hash01(col, row, tag);  // per-brick tint
    return {std::min(1.0, face.r * shade), std::min(1.0, face.g * shade),
            std::min(1.0, face.b * shade)};
}

Color backdrop_color(int id, double x, double y) {
    switch (id) {
        case 0:  // training wall: red brick
            return brick(x, y, 1.0, 0.5, {0.58, 0.14, 0.10}, {0.72, 0.69, 0.65}, 17);
        case 1: {  // horizontal green/white stripes
            const std::int64_t band = static_cast<std::int64_t>(std::floor(y / 0.8));
            return (band % 2 == 0) ? Color{0.15, 0.55, 0.20} : Color{0.90, 0.92, 0.88};
        }
        case 2: {  // blue/yellow checkerboard
            const std::int64_t cx = static_cast<std::int64_t>(std::floor(x));
            const std::int64_t cy = static_cast<std::int64_t>(std::floor(y));
            return ((cx + cy) % 2 == 0) ? Color{0.12, 0.25, 0.70} : Color{0.85, 0.80, 0.20};
        }
        case 3: {  // soft grayscale noise field
            const double v = 0.25 + 0.6 * value_noise(x, y, 0.5, 31);
            return {v, v, v};
        }
        case 4:  // hue-shifted bricks (blue)
            return brick(x, y, 1.0, 0.5, {0.10, 0.20, 0.62}, {0.70, 0.73, 0.78}, 47);
        case 5: {  // vertical purple/orange stripes
            const std::int64_t band = static_cast<std::int64_t>(std::floor(x / 0.6));
            return (band % 2 == 0) ? Color{0.45, 0.15, 0.60} : Color{0.95, 0.55, 0.10};
        }
        case 6: {  // green-tinted noise field
            const double v = value_noise(x, y, 0.7, 59);
            return {0.15 + 0.25 * v, 0.35 + 0.5 * v, 0.15 + 0.2 * v};
        }
        case 7:  // red variant: same hue family as training, finer courses
            return brick(x, y, 0.5, 0.25, {0.65, 0.17, 0.12}, {0.45, 0.20, 0.16}, 71);
        default: {  // seeded per-cell color noise
            const std::int64_t cx = static_cast<std::int64_t>(std::floor(x / 0.5));
            const std::int64_t cy = static_cast<std::int64_t>(std::floor(y / 0.5));
            return {hash01(cx, cy, 100 + id), hash01(cx, cy, 200 + id),
                    hash01(cx, cy, 300 + id)};
        }
    }
}

constexpr int kSub = 4;  // subpixel coverage grid

double disc_coverage(double x0, double y0, double dx, double dy, double cx, double cy, double r) {
    int inside = 0;
    for (int sy = 0; sy < kSub; ++sy)
        for (int sx = 0; sx < kSub; ++sx) {
            const double px = x0 + (sx + 0.5) * dx / kSub;
            const double py = y0 + (sy + 0.5) * dy / kSub;
            const double ex = px - cx, ey = py - cy;
            if (ex * ex + ey * ey <= r * r) ++inside;
        }
    return static_cast<double>(inside) / (kSub * kSub);
}

double rect_coverage(double x0, double y0, double dx, double dy, double rx0, double rx1,
                     double ry0, double ry1) {
    int inside = 0;
    for (int sy = 0; sy < kSub; ++sy)
        for (int sx = 0; sx < kSub; ++sx) {
            const double px = x0 + (sx + 0.5) * dx / kSub;
            const double py = y0 + (sy + 0.5) * dy / kSub;
            if (px >= rx0 && px <= rx1 && py >= ry0 && py <= ry1) ++inside;
        }
    return static_cast<double>(inside) / (kSub * kSub);
}

}  // namespace

void render_backdrop(int texture_id, std::size_t image_size, double* out) {
    require(image_size > 0, "render_backdrop: zero image size");
    require(texture_id >= 0, "render_backdrop: negative texture id");
    const std::size_t n = image_size;
    const double pw = (kCamXHi - kCamXLo) / static_cast<double>(n);
    const double ph = (kCamYHi - kCamYLo) / static_cast<double>(n);
    for (std::size_t py = 0; py < n; ++py) {
        for (std::size_t px = 0; px < n; ++px) {
            const double wx = kCamXLo + (static_cast<double>(px) + 0.5) * pw;
            const double wy = kCamYHi - (static_cast<double>(py) + 0.5) * ph;
            const Color c = backdrop_color(texture_id, wx, wy);
            out[0 * n * n + py * n + px] = c.r;
            out[1 * n * n + py * n + px] = c.g;
            out[2 * n * n + py * n + px] = c.b;
        }
    }
}

void ballcatch_render(const BallCatchState& s, const EnvShiftSpec& shift, std::size_t image_size,
                      Rng& rng, double* out) {
    require(image_size == 16 || image_size == 32 || image_size == 64,
            "ballcatch_render: image size must be 16, 32, or 64");
    require(shift.sensor_noise >= 0.0, "ballcatch_render: negative pixel noise");
    const std::size_t n = image_size;
    render_backdrop(shift.texture_id, n, out);

    const Color ball{0.95, 0.95, 0.92};
    const Color robot{0.10, 0.10, 0.32};
    const double pw = (kCamXHi - kCamXLo) / static_cast<double>(n);
    const double ph = (kCamYHi - kCamYLo) / static_cast<double>(n);
    for (std::size_t py = 0; py < n; ++py) {
        for (std::size_t px = 0; px < n; ++px) {
            const double x0 = kCamXLo + static_cast<double>(px) * pw;
            const double y0 = kCamYHi - static_cast<double>(py + 1) * ph;
            const double cb = disc_coverage(x0, y0, pw, ph, s.bx, s.by, kBallRadius);
            const double cr = rect_coverage(x0, y0, pw, ph, s.d - kRobotHalfWidth,
                                            s.d + kRobotHalfWidth, 0.0, kRobotHeight);
            if (cb == 0.0 && cr == 0.0) continue;
            for (int c = 0; c < 3; ++c) {
                double* px_v = &out[static_cast<std::size_t>(c) * n * n + py * n + px];
                const double bc = c == 0 ? ball.r : (c == 1 ? ball.g : ball.b);
                const double rc = c == 0 ? robot.r : (c == 1 ? robot.g : robot.b);
                double v = *px_v * (1.0 - cb) + bc * cb;
                v = v * (1.0 - cr) + rc * cr;  // robot occludes the ball
                *px_v = v;
            }
        }
    }

    if (shift.sensor_noise > 0.0) {
        const std::size_t total = 3 * n * n;
        for (std::size_t i = 0; i < total; ++i)
            out[i] = std::clamp(out[i] + shift.sensor_noise * rng.normal(), 0.0, 1.0);
    }
}

void write_ppm(const std::string& path, const double* rgb, std::size_t image_size) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ContractViolation("write_ppm: cannot open '" + path + "'");
    const std::size_t n = image_size;
    os << "P6\n" << n << " " << n << "\n255\n";
    for (std::size_t py = 0; py < n; ++py)
        for (std::size_t px = 0; px < n; ++px)
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(rgb[static_cast<std::size_t>(c) * n * n + py * n + px],
                                            0.0, 1.0);
                os.put(static_cast<char>(static_cast<int>(v * 255.0 + 0.5)));
            }
    if (!os) throw ContractViolation("write_ppm: write failure on '" + path + "'");
}

}  // namespace tdpg
