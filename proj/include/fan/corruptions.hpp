#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fan/tensor.hpp"

namespace fan {

enum class CorruptionKind {
    GaussianNoise,
    ShotNoise,
    ImpulseNoise,
    SpeckleNoise,
    GaussianBlur,
    Contrast,
    Brightness,
    Saturate,
    Pixelate,
};

constexpr std::array<CorruptionKind, 9> kAllCorruptions = {
    CorruptionKind::GaussianNoise, CorruptionKind::ShotNoise,
    CorruptionKind::ImpulseNoise,  CorruptionKind::SpeckleNoise,
    CorruptionKind::GaussianBlur,  CorruptionKind::Contrast,
    CorruptionKind::Brightness,    CorruptionKind::Saturate,
    CorruptionKind::Pixelate,
};

std::string to_string(CorruptionKind k);
CorruptionKind corruption_from_string(const std::string& s);

// Severity parameter ladders, 5 entries per kind. The defaults are the
// repo's canon; a versioned JSON copy ships alongside so runs stay
// bit-reproducible across machines.
struct SeverityLadders {
    int version = 1;
    std::array<double, 5> gaussian_noise{0.04, 0.08, 0.12, 0.18, 0.26}; // sigma
    std::array<double, 5> shot_noise{60.0, 25.0, 12.0, 5.0, 3.0};       // photon count scale
    std::array<double, 5> impulse_noise{0.01, 0.03, 0.06, 0.09, 0.14};  // flip probability
    std::array<double, 5> speckle_noise{0.06, 0.10, 0.15, 0.20, 0.30};  // multiplicative sigma
    std::array<double, 5> gaussian_blur{0.4, 0.6, 0.9, 1.3, 1.8};       // blur sigma (pixels)
    std::array<double, 5> contrast{0.75, 0.55, 0.40, 0.30, 0.15};       // contrast factor
    std::array<double, 5> brightness{0.05, 0.09, 0.14, 0.20, 0.30};     // additive offset
    std::array<double, 5> saturate{1.3, 1.6, 2.0, 2.5, 3.0};            // saturation factor
    std::array<double, 5> pixelate{2, 2, 4, 4, 8};                      // block size

    static SeverityLadders load(const std::string& path);
    void save(const std::string& path) const;
    std::string to_json() const;
    static SeverityLadders from_json(const std::string& json);
};

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::GaussianNoise;
    int severity = 1; // 1..5
    uint64_t seed = 0;
    uint64_t image_id = 0; // part of the noise stream key

    void validate() const;
};

// image is C x H x W in [0,1]; output clipped to [0,1], same shape.
Tensor corrupt(const Tensor& image, const CorruptionSpec& spec,
               const SeverityLadders& ladders = SeverityLadders{});

struct SuiteEntry {
    size_t image_index = 0;
    CorruptionKind kind = CorruptionKind::GaussianNoise;
    int severity = 1;
    std::string path;  // empty if not written to disk
    std::string error; // non-empty when this file failed
};

struct SuiteManifest {
    uint64_t seed = 0;
    std::vector<SuiteEntry> entries;
    std::string to_json() const;
};

// One corrupted copy per (image, kind, severity). When out_dir is empty the
// images are returned in `outputs` only. I/O failures are recorded per
// entry and the suite continues.
SuiteManifest corruption_suite(const std::vector<Tensor>& images,
                               const std::vector<CorruptionKind>& kinds,
                               const std::vector<int>& severities, uint64_t seed,
                               const std::string& out_dir = "",
                               std::vector<Tensor>* outputs = nullptr,
                               const SeverityLadders& ladders = SeverityLadders{});

} // namespace fan
