#include "fan/corruptions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fan/io.hpp"
#include "fan/rng.hpp"

namespace fan {

using nlohmann::json;

std::string to_string(CorruptionKind k) {
    switch (k) {
        case CorruptionKind::GaussianNoise: return "gaussian_noise";
        case CorruptionKind::ShotNoise: return "shot_noise";
        case CorruptionKind::ImpulseNoise: return "impulse_noise";
        case CorruptionKind::SpeckleNoise: return "speckle_noise";
        case CorruptionKind::GaussianBlur: return "gaussian_blur";
        case CorruptionKind::Contrast: return "contrast";
        case CorruptionKind::Brightness: return "brightness";
        case CorruptionKind::Saturate: return "saturate";
        case CorruptionKind::Pixelate: return "pixelate";
    }
    throw std::logic_error("bad CorruptionKind");
}

CorruptionKind corruption_from_string(const std::string& s) {
    for (CorruptionKind k : kAllCorruptions)
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown corruption kind: " + s);
}

void CorruptionSpec::validate() const {
    if (severity < 1 || severity > 5)
        throw std::invalid_argument("corruption severity must be in 1..5, got " +
                                    std::to_string(severity));
}

namespace {

json ladders_to_json(const SeverityLadders& l) {
    auto arr = [](const std::array<double, 5>& a) { return json(std::vector<double>(a.begin(), a.end())); };
    return json{{"version", l.version},
                {"gaussian_noise", arr(l.gaussian_noise)},
                {"shot_noise", arr(l.shot_noise)},
                {"impulse_noise", arr(l.impulse_noise)},
                {"speckle_noise", arr(l.speckle_noise)},
                {"gaussian_blur", arr(l.gaussian_blur)},
                {"contrast", arr(l.contrast)},
                {"brightness", arr(l.brightness)},
                {"saturate", arr(l.saturate)},
                {"pixelate", arr(l.pixelate)}};
}

void ladder_from_json(const json& j, const char* key, std::array<double, 5>& out) {
    auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 5)
        throw std::runtime_error(std::string("ladder for ") + key + " must have 5 entries");
    std::copy(v.begin(), v.end(), out.begin());
}

} // namespace

std::string SeverityLadders::to_json() const { return ladders_to_json(*this).dump(2); }

SeverityLadders SeverityLadders::from_json(const std::string& text) {
    json j = json::parse(text);
    SeverityLadders l;
    l.version = j.at("version").get<int>();
    ladder_from_json(j, "gaussian_noise", l.gaussian_noise);
    ladder_from_json(j, "shot_noise", l.shot_noise);
    ladder_from_json(j, "impulse_noise", l.impulse_noise);
    ladder_from_json(j, "speckle_noise", l.speckle_noise);
    ladder_from_json(j, "gaussian_blur", l.gaussian_blur);
    ladder_from_json(j, "contrast", l.contrast);
    ladder_from_json(j, "brightness", l.brightness);
    ladder_from_json(j, "saturate", l.saturate);
    ladder_from_json(j, "pixelate", l.pixelate);
    return l;
}

SeverityLadders SeverityLadders::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open ladder file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return from_json(ss.str());
}

void SeverityLadders::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write ladder file: " + path);
    os << to_json() << "\n";
}

namespace {

void clip01(Tensor& t) {
    for (size_t i = 0; i < t.size(); ++i) t[i] = std::clamp(t[i], 0.0, 1.0);
}

Tensor gaussian_blur_image(const Tensor& img, double sigma) {
    const size_t C = img.shape()[0], H = img.shape()[1], W = img.shape()[2];
    const int radius = std::max(1, (int)std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        kernel[t + radius] = std::exp(-0.5 * (t * t) / (sigma * sigma));
        ksum += kernel[t + radius];
    }
    for (auto& k : kernel) k /= ksum;

    auto reflect = [](long i, long n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - i - 1;
        }
        return (size_t)i;
    };

    Tensor tmp(img.shape()), out(img.shape());
    for (size_t c = 0; c < C; ++c) {
        for (size_t y = 0; y < H; ++y)
            for (size_t x = 0; x < W; ++x) {
                double s = 0.0;
                for (int t = -radius; t <= radius; ++t)
                    s += kernel[t + radius] * img.at3(c, y, reflect((long)x + t, (long)W));
                tmp.at3(c, y, x) = s;
            }
        for (size_t y = 0; y < H; ++y)
            for (size_t x = 0; x < W; ++x) {
                double s = 0.0;
                for (int t = -radius; t <= radius; ++t)
                    s += kernel[t + radius] * tmp.at3(c, reflect((long)y + t, (long)H), x);
                out.at3(c, y, x) = s;
            }
    }
    return out;
}

} // namespace

Tensor corrupt(const Tensor& image, const CorruptionSpec& spec, const SeverityLadders& L) {
    spec.validate();
    if (image.rank() != 3)
        throw std::invalid_argument("corrupt expects C x H x W image, got " + image.shape_str());
    const size_t C = image.shape()[0], H = image.shape()[1], W = image.shape()[2];
    const int s = spec.severity - 1;
    Rng rng(derive_seed(spec.seed, "corrupt/" + to_string(spec.kind), spec.image_id,
                        (uint64_t)spec.severity));
    Tensor out = image;

    switch (spec.kind) {
        case CorruptionKind::GaussianNoise: {
            double sigma = L.gaussian_noise[s];
            for (size_t i = 0; i < out.size(); ++i) out[i] += sigma * rng.normal();
            break;
        }
        case CorruptionKind::ShotNoise: {
            // Gaussian approximation of Poisson photon counts at scale c
            double c = L.shot_noise[s];
            for (size_t i = 0; i < out.size(); ++i)
                out[i] += std::sqrt(std::max(out[i], 0.0) / c) * rng.normal();
            break;
        }
        case CorruptionKind::ImpulseNoise: {
            double p = L.impulse_noise[s];
            for (size_t i = 0; i < out.size(); ++i) {
                double u = rng.next_double();
                if (u < p / 2) out[i] = 0.0;
                else if (u < p) out[i] = 1.0;
            }
            break;
        }
        case CorruptionKind::SpeckleNoise: {
            double sigma = L.speckle_noise[s];
            for (size_t i = 0; i < out.size(); ++i) out[i] += out[i] * sigma * rng.normal();
            break;
        }
        case CorruptionKind::GaussianBlur:
            out = gaussian_blur_image(image, L.gaussian_blur[s]);
            break;
        case CorruptionKind::Contrast: {
            double f = L.contrast[s];
            for (size_t c = 0; c < C; ++c) {
                double mean = 0.0;
                for (size_t y = 0; y < H; ++y)
                    for (size_t x = 0; x < W; ++x) mean += image.at3(c, y, x);
                mean /= (double)(H * W);
                for (size_t y = 0; y < H; ++y)
                    for (size_t x = 0; x < W; ++x)
                        out.at3(c, y, x) = (image.at3(c, y, x) - mean) * f + mean;
            }
            break;
        }
        case CorruptionKind::Brightness: {
            double b = L.brightness[s];
            for (size_t i = 0; i < out.size(); ++i) out[i] += b;
            break;
        }
        case CorruptionKind::Saturate: {
            // scale distance from the per-pixel channel mean; identity for C=1
            double f = L.saturate[s];
            for (size_t y = 0; y < H; ++y)
                for (size_t x = 0; x < W; ++x) {
                    double mean = 0.0;
                    for (size_t c = 0; c < C; ++c) mean += image.at3(c, y, x);
                    mean /= (double)C;
                    for (size_t c = 0; c < C; ++c)
                        out.at3(c, y, x) = mean + (image.at3(c, y, x) - mean) * f;
                }
            break;
        }
        case CorruptionKind::Pixelate: {
            // down-up nearest resample: every k x k block takes its
            // top-left pixel, so a further nearest downsample by k equals
            // downsampling the original
            size_t k = (size_t)L.pixelate[s];
            for (size_t c = 0; c < C; ++c)
                for (size_t y = 0; y < H; ++y)
                    for (size_t x = 0; x < W; ++x)
                        out.at3(c, y, x) = image.at3(c, (y / k) * k, (x / k) * k);
            break;
        }
    }
    clip01(out);
    return out;
}

std::string SuiteManifest::to_json() const {
    json j;
    j["seed"] = seed;
    j["entries"] = json::array();
    for (const auto& e : entries) {
        json je{{"image_index", e.image_index},
                {"kind", to_string(e.kind)},
                {"severity", e.severity},
                {"path", e.path}};
        if (!e.error.empty()) je["error"] = e.error;
        j["entries"].push_back(je);
    }
    return j.dump(2);
}

SuiteManifest corruption_suite(const std::vector<Tensor>& images,
                               const std::vector<CorruptionKind>& kinds,
                               const std::vector<int>& severities, uint64_t seed,
                               const std::string& out_dir, std::vector<Tensor>* outputs,
                               const SeverityLadders& ladders) {
    SuiteManifest manifest;
    manifest.seed = seed;
    for (size_t i = 0; i < images.size(); ++i)
        for (CorruptionKind k : kinds)
            for (int sev : severities) {
                SuiteEntry entry;
                entry.image_index = i;
                entry.kind = k;
                entry.severity = sev;
                try {
                    CorruptionSpec spec{k, sev, seed, i};
                    Tensor c = corrupt(images[i], spec, ladders);
                    if (!out_dir.empty()) {
                        entry.path = out_dir + "/img" + std::to_string(i) + "_" +
                                     to_string(k) + "_s" + std::to_string(sev) + ".pgm";
                        if (images[i].shape()[0] == 3)
                            entry.path = entry.path.substr(0, entry.path.size() - 4) + ".ppm";
                        save_image(entry.path, c);
                    }
                    if (outputs) outputs->push_back(std::move(c));
                } catch (const std::exception& e) {
                    entry.error = e.what();
                }
                manifest.entries.push_back(std::move(entry));
            }
    return manifest;
}

} // namespace fan
