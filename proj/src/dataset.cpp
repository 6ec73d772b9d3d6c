#include "fan/dataset.hpp"

#include <cmath>

#include "fan/rng.hpp"

namespace fan {

namespace {

constexpr double kBackground = 0.25;
constexpr double kForeground = 0.85;

struct ShapeInstance {
    size_t cls;
    double cx, cy;   // center, pixel coords
    double radius;   // characteristic half-size
    double angle;    // rotation
};

bool inside(const ShapeInstance& s, double x, double y) {
    // rotate into the shape frame
    double dx = x - s.cx, dy = y - s.cy;
    double c = std::cos(-s.angle), sn = std::sin(-s.angle);
    double u = c * dx - sn * dy;
    double v = sn * dx + c * dy;
    switch (s.cls) {
        case 0: // circle
            return u * u + v * v <= s.radius * s.radius;
        case 1: // square
            return std::fabs(u) <= s.radius && std::fabs(v) <= s.radius;
        case 2: { // equilateral triangle, apex up
            // vertices at angle 90, 210, 330 degrees
            double r = s.radius * 1.2;
            double ax = 0, ay = -r;
            double bx = -r * 0.8660254037844386, by = r * 0.5;
            double cx2 = r * 0.8660254037844386, cy2 = r * 0.5;
            auto side = [&](double x1, double y1, double x2, double y2) {
                return (x2 - x1) * (v - y1) - (y2 - y1) * (u - x1);
            };
            double d1 = side(ax, ay, bx, by);
            double d2 = side(bx, by, cx2, cy2);
            double d3 = side(cx2, cy2, ax, ay);
            bool neg = (d1 < 0) || (d2 < 0) || (d3 < 0);
            bool pos = (d1 > 0) || (d2 > 0) || (d3 > 0);
            return !(neg && pos);
        }
        case 3: { // cross: union of two bars
            double w = s.radius * 0.35;
            return (std::fabs(u) <= s.radius && std::fabs(v) <= w) ||
                   (std::fabs(v) <= s.radius && std::fabs(u) <= w);
        }
        default: return false;
    }
}

// 4x4 supersampled coverage in [0,1]
double coverage(const ShapeInstance& s, size_t px, size_t py) {
    int hits = 0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            double x = px + (a + 0.5) / 4.0;
            double y = py + (b + 0.5) / 4.0;
            if (inside(s, x, y)) hits++;
        }
    return hits / 16.0;
}

// bilinear value noise on an 8px lattice, range [-1, 1]
double value_noise(Rng& grid_rng, std::vector<double>& grid, size_t gw, size_t gh,
                   double x, double y) {
    size_t x0 = (size_t)x / 8, y0 = (size_t)y / 8;
    double fx = (x - x0 * 8.0) / 8.0, fy = (y - y0 * 8.0) / 8.0;
    auto g = [&](size_t gx, size_t gy) { return grid[std::min(gy, gh - 1) * gw + std::min(gx, gw - 1)]; };
    double v00 = g(x0, y0), v10 = g(x0 + 1, y0), v01 = g(x0, y0 + 1), v11 = g(x0 + 1, y0 + 1);
    (void)grid_rng;
    return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
}

} // namespace

ShapesDataset gen_shapes(size_t per_class, size_t height, size_t width, double noise,
                         uint64_t seed, const std::string& split) {
    ShapesDataset ds;
    ds.split = split;
    ds.seed = seed;
    ds.noise = noise;

    const size_t gw = width / 8 + 2, gh = height / 8 + 2;
    for (size_t idx = 0; idx < per_class; ++idx) {
        for (size_t cls = 0; cls < kShapeClasses.size(); ++cls) {
            Rng rng(derive_seed(seed, "shapes/" + split, cls, idx));
            ShapeInstance s;
            s.cls = cls;
            double margin = 0.28 * std::min(height, width);
            s.radius = rng.uniform(0.16, 0.3) * std::min(height, width);
            s.cx = rng.uniform(margin, width - margin);
            s.cy = rng.uniform(margin, height - margin);
            s.angle = rng.uniform(0.0, 3.14159265358979323846);

            std::vector<double> grid(gw * gh);
            for (auto& v : grid) v = rng.uniform(-1.0, 1.0);

            Tensor img({1, height, width});
            for (size_t y = 0; y < height; ++y)
                for (size_t x = 0; x < width; ++x) {
                    double bg = kBackground +
                                noise * 0.15 * value_noise(rng, grid, gw, gh, (double)x, (double)y);
                    double cov = coverage(s, x, y);
                    double v = bg + cov * (kForeground - kBackground);
                    if (noise > 0) v += noise * 0.08 * rng.normal();
                    img.at3(0, y, x) = std::clamp(v, 0.0, 1.0);
                }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(cls);
        }
    }
    return ds;
}

} // namespace fan
