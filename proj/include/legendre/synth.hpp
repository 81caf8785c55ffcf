#pragma once

#include <cstdint>

#include "legendre/tensor.hpp"

namespace legendre {

/// Procedural handwritten-style digit images. Used to rebuild an MNIST-like
/// corpus when the real IDX files are not on disk: each digit is a set of
/// pen strokes rendered with a Gaussian profile, with per-image jitter in
/// position, scale, rotation, shear, stroke width and intensity.
struct DigitStyle {
    int size = 28;
    double stroke_px = 1.15;        // pen radius in pixels
    double intensity_lo = 0.78;     // peak value scale, fraction of 255
    double intensity_hi = 1.0;
    double jitter = 0.022;          // per-control-point wobble, unit box
    double max_shift = 0.055;       // translation, unit box
    double max_rotate = 0.16;       // radians
    double max_shear = 0.14;
    double scale_lo = 0.86;
    double scale_hi = 1.10;
    int speckle_count = 3;          // isolated faint stray pixels per image
    double ink_noise = 0.0;         // per-pixel multiplicative sigma on ink
    double pressure = 0.0;          // depth of along-stroke intensity dips
    int cutoff = 6;                 // values below this quantize to 0
};

/// One size x size image of the given digit (0-9), values in {0} U [cutoff, 255].
DenseTensor render_digit(int digit, std::uint64_t seed, const DigitStyle& style = {});

/// size x size x count tensor stacking jittered copies of one digit along
/// the last axis (the layout the batch experiments use).
DenseTensor stacked_digit_tensor(int digit, int count, std::uint64_t seed,
                                 const DigitStyle& style = {});

}  // namespace legendre
