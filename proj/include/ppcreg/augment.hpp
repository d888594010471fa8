#pragma once

#include <cstdint>

#include "ppcreg/image.hpp"

namespace ppcreg {

/// Domain-randomization style parameters. Applied after min-max
/// normalization, in the order: gamma, brightness, inversion, noise, clamp.
struct StyleAugmentation {
    double gamma = 1.0;       // contrast exponent, > 0
    double brightness = 0.0;  // additive offset in normalized units
    bool invert = false;
    double noise_sigma = 0.0; // Gaussian std in normalized units, >= 0
    std::uint64_t seed = 0;   // noise stream

    void validate() const;
};

/// Applies the augmentation pipeline; output pixels lie in [0, 1] and the
/// style tag becomes `augmented`. Bit-reproducible for a fixed seed.
Image2D apply_augmentation(const Image2D& img, const StyleAugmentation& aug);

/// Randomization policy: gamma in [0.5, 2], brightness in [-0.2, 0.2],
/// inversion with p = 0.5, sigma in [0, 0.05]; the noise seed is drawn from
/// the same stream.
StyleAugmentation sample_augmentation(std::uint64_t seed);

} // namespace ppcreg
