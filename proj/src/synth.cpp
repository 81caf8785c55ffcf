#include "legendre/synth.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "legendre/rng.hpp"

namespace legendre {

namespace {

struct Pt {
    double x, y;
};

using Stroke = std::vector<Pt>;

Stroke ellipse(double cx, double cy, double rx, double ry, int segments = 14) {
    Stroke s;
    s.reserve(static_cast<std::size_t>(segments) + 1);
    for (int i = 0; i <= segments; ++i) {
        const double t = 2.0 * 3.14159265358979323846 * i / segments;
        s.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
    }
    return s;
}

// Control polylines per digit, coordinates in the unit box, y pointing down.
std::vector<Stroke> digit_strokes(int digit) {
    switch (digit) {
        case 0:
            return {ellipse(0.50, 0.50, 0.21, 0.31)};
        case 1:
            return {{{0.40, 0.27}, {0.53, 0.15}}, {{0.53, 0.15}, {0.53, 0.50}, {0.52, 0.85}}};
        case 2:
            return {{{0.32, 0.29},
                     {0.37, 0.19},
                     {0.50, 0.15},
                     {0.63, 0.19},
                     {0.67, 0.31},
                     {0.58, 0.45},
                     {0.41, 0.61},
                     {0.31, 0.79}},
                    {{0.31, 0.81}, {0.50, 0.81}, {0.70, 0.80}}};
        case 3:
            return {{{0.33, 0.22},
                     {0.46, 0.15},
                     {0.61, 0.19},
                     {0.66, 0.29},
                     {0.57, 0.41},
                     {0.47, 0.45}},
                    {{0.47, 0.45},
                     {0.62, 0.50},
                     {0.68, 0.62},
                     {0.60, 0.77},
                     {0.44, 0.82},
                     {0.32, 0.73}}};
        case 4:
            return {{{0.58, 0.15}, {0.58, 0.50}, {0.57, 0.85}},
                    {{0.58, 0.15}, {0.43, 0.37}, {0.32, 0.57}},
                    {{0.32, 0.58}, {0.52, 0.58}, {0.72, 0.57}}};
        case 5:
            return {{{0.65, 0.16}, {0.50, 0.16}, {0.37, 0.17}},
                    {{0.37, 0.17}, {0.35, 0.31}, {0.34, 0.45}},
                    {{0.34, 0.45},
                     {0.52, 0.42},
                     {0.64, 0.50},
                     {0.66, 0.65},
                     {0.55, 0.79},
                     {0.36, 0.77}}};
        case 6:
            return {{{0.60, 0.14},
                     {0.46, 0.22},
                     {0.36, 0.40},
                     {0.33, 0.60},
                     {0.40, 0.78},
                     {0.55, 0.82},
                     {0.65, 0.69},
                     {0.61, 0.55},
                     {0.47, 0.51},
                     {0.36, 0.59}}};
        case 7:
            return {{{0.30, 0.18}, {0.50, 0.17}, {0.69, 0.18}},
                    {{0.69, 0.18}, {0.55, 0.50}, {0.42, 0.84}}};
        case 8:
            return {ellipse(0.50, 0.32, 0.16, 0.17), ellipse(0.50, 0.66, 0.20, 0.18)};
        case 9:
            return {ellipse(0.52, 0.33, 0.16, 0.17),
                    {{0.68, 0.36}, {0.66, 0.60}, {0.57, 0.84}}};
        default:
            throw Error("digit must be in [0, 9]");
    }
}

// Dense samples along a Catmull-Rom spline through the control points.
std::vector<Pt> sample_spline(const Stroke& pts, int per_segment = 22) {
    std::vector<Pt> out;
    if (pts.size() < 2) return out;
    const auto clampi = [&pts](int i) {
        return pts[static_cast<std::size_t>(std::clamp<int>(i, 0, static_cast<int>(pts.size()) - 1))];
    };
    for (int seg = 0; seg + 1 < static_cast<int>(pts.size()); ++seg) {
        const Pt p0 = clampi(seg - 1), p1 = clampi(seg), p2 = clampi(seg + 1), p3 = clampi(seg + 2);
        for (int i = 0; i < per_segment; ++i) {
            const double t = static_cast<double>(i) / per_segment;
            const double t2 = t * t, t3 = t2 * t;
            out.push_back(
                {0.5 * ((2 * p1.x) + (-p0.x + p2.x) * t +
                        (2 * p0.x - 5 * p1.x + 4 * p2.x - p3.x) * t2 +
                        (-p0.x + 3 * p1.x - 3 * p2.x + p3.x) * t3),
                 0.5 * ((2 * p1.y) + (-p0.y + p2.y) * t +
                        (2 * p0.y - 5 * p1.y + 4 * p2.y - p3.y) * t2 +
                        (-p0.y + 3 * p1.y - 3 * p2.y + p3.y) * t3)});
        }
    }
    out.push_back(pts.back());
    return out;
}

}  // namespace

DenseTensor render_digit(int digit, std::uint64_t seed, const DigitStyle& style) {
    Rng rng(seed);
    const int n = style.size;

    const double shift_x = rng.uniform(-style.max_shift, style.max_shift);
    const double shift_y = rng.uniform(-style.max_shift, style.max_shift);
    const double scale = rng.uniform(style.scale_lo, style.scale_hi);
    const double angle = rng.uniform(-style.max_rotate, style.max_rotate);
    const double shear = rng.uniform(-style.max_shear, style.max_shear);
    const double cos_a = std::cos(angle), sin_a = std::sin(angle);
    const double peak = 255.0 * rng.uniform(style.intensity_lo, style.intensity_hi);
    const double width = style.stroke_px * rng.uniform(0.85, 1.25);

    std::vector<Pt> samples;
    std::vector<double> weights;  // pen pressure along the stroke
    for (const auto& stroke : digit_strokes(digit)) {
        Stroke warped;
        warped.reserve(stroke.size());
        for (const Pt& p : stroke) {
            double x = p.x + rng.uniform(-style.jitter, style.jitter) - 0.5;
            double y = p.y + rng.uniform(-style.jitter, style.jitter) - 0.5;
            x += shear * y;
            const double rx = cos_a * x - sin_a * y;
            const double ry = sin_a * x + cos_a * y;
            warped.push_back({(rx * scale + 0.5 + shift_x) * n, (ry * scale + 0.5 + shift_y) * n});
        }
        auto pts = sample_spline(warped);
        const double freq = rng.uniform(1.0, 2.2);
        const double phase = rng.uniform(0.0, 6.28318530717958647692);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double u = static_cast<double>(i) / std::max<std::size_t>(1, pts.size() - 1);
            const double dip =
                style.pressure * (0.5 + 0.5 * std::sin(6.28318530717958647692 * freq * u + phase));
            weights.push_back(1.0 - dip);
        }
        samples.insert(samples.end(), pts.begin(), pts.end());
    }

    DenseTensor img({n, n});
    const double inv_two_w2 = 1.0 / (2.0 * width * width);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const double px = c + 0.5, py = r + 0.5;
            double best = 0.0;
            for (std::size_t s = 0; s < samples.size(); ++s) {
                const double dx = px - samples[s].x, dy = py - samples[s].y;
                const double d2 = dx * dx + dy * dy;
                if (d2 < 16.0) best = std::max(best, weights[s] * std::exp(-d2 * inv_two_w2));
            }
            double value = peak * best;
            if (style.ink_noise > 0.0 && value >= 1.0)
                value *= 1.0 + style.ink_noise * rng.normal();
            value = std::floor(value + 0.5);
            if (value < style.cutoff) value = 0.0;
            img[static_cast<std::size_t>(r) * static_cast<std::size_t>(n) +
                static_cast<std::size_t>(c)] = std::clamp(value, 0.0, 255.0);
        }
    }

    // Scattered faint stray pixels, like scanner dust.
    for (int i = 0; i < style.speckle_count; ++i) {
        const std::size_t cell =
            rng.below(static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n));
        if (img[cell] == 0.0)
            img[cell] = std::floor(rng.uniform(style.cutoff, style.cutoff + 25.0));
    }
    return img;
}

DenseTensor stacked_digit_tensor(int digit, int count, std::uint64_t seed,
                                 const DigitStyle& style) {
    if (count < 1) throw Error("stacked_digit_tensor: count must be positive");
    const int n = style.size;
    DenseTensor t({n, n, count});
    for (int k = 0; k < count; ++k) {
        const DenseTensor img =
            render_digit(digit, Rng::mix(seed, static_cast<std::uint64_t>(k)), style);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                t[(static_cast<std::size_t>(r) * static_cast<std::size_t>(n) +
                   static_cast<std::size_t>(c)) *
                      static_cast<std::size_t>(count) +
                  static_cast<std::size_t>(k)] =
                    img[static_cast<std::size_t>(r) * static_cast<std::size_t>(n) +
                        static_cast<std::size_t>(c)];
    }
    return t;
}

}  // namespace legendre
