#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fan/tensor.hpp"

namespace fan {

constexpr std::array<const char*, 4> kShapeClasses = {"circle", "square", "triangle", "cross"};

struct ShapesDataset {
    std::vector<Tensor> images; // 1 x H x W in [0,1]
    std::vector<size_t> labels; // index into kShapeClasses
    std::string split;
    uint64_t seed = 0;
    double noise = 0.0;

    size_t size() const { return images.size(); }
};

// Anti-aliased filled shapes at random position/scale/rotation over a
// textured background. Balanced classes, deterministic given (seed, split).
// noise = 0 leaves the background at a flat 0.25 with shapes at 0.85.
ShapesDataset gen_shapes(size_t per_class, size_t height, size_t width, double noise,
                         uint64_t seed, const std::string& split = "train");

} // namespace fan
