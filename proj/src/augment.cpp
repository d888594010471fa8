#include "ppcreg/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ppcreg/rng.hpp"

namespace ppcreg {

void StyleAugmentation::validate() const {
    if (!(gamma > 0)) throw std::invalid_argument("gamma must be positive");
    if (noise_sigma < 0) throw std::invalid_argument("noise sigma must be >= 0");
    if (!std::isfinite(gamma) || !std::isfinite(brightness) || !std::isfinite(noise_sigma))
        throw std::invalid_argument("augmentation parameters must be finite");
}

Image2D apply_augmentation(const Image2D& img, const StyleAugmentation& aug) {
    aug.validate();
    img.validate();

    Image2D out = img;
    out.style = ImageStyle::augmented;

    const auto [mn_it, mx_it] = std::minmax_element(img.data.begin(), img.data.end());
    const double mn = *mn_it, mx = *mx_it;
    const double inv_range = mx > mn ? 1.0 / (mx - mn) : 0.0;

    Rng rng(aug.seed);
    for (auto& v : out.data) {
        double x = (static_cast<double>(v) - mn) * inv_range;
        if (aug.gamma != 1.0) x = std::pow(x, aug.gamma);
        x += aug.brightness;
        if (aug.invert) x = 1.0 - x;
        if (aug.noise_sigma > 0) x += aug.noise_sigma * normal01(rng);
        v = static_cast<float>(std::clamp(x, 0.0, 1.0));
    }
    return out;
}

StyleAugmentation sample_augmentation(std::uint64_t seed) {
    Rng rng(seed);
    StyleAugmentation aug;
    aug.gamma = uniform_range(rng, 0.5, 2.0);
    aug.brightness = uniform_range(rng, -0.2, 0.2);
    aug.invert = uniform01(rng) < 0.5;
    aug.noise_sigma = uniform_range(rng, 0.0, 0.05);
    aug.seed = rng();
    return aug;
}

} // namespace ppcreg
