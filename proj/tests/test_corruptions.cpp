#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fan/corruptions.hpp"
#include "fan/rng.hpp"

using namespace fan;

namespace {

Tensor constant_image(size_t H, size_t W, double v, size_t C = 1) {
    return Tensor::full({C, H, W}, v);
}

Tensor random_image(size_t H, size_t W, uint64_t seed, double lo = 0.0, double hi = 1.0,
                    size_t C = 1) {
    Tensor img({C, H, W});
    Rng rng(seed);
    for (size_t i = 0; i < img.size(); ++i) img[i] = rng.uniform(lo, hi);
    return img;
}

double mean_of(const Tensor& t) {
    double s = 0.0;
    for (size_t i = 0; i < t.size(); ++i) s += t[i];
    return s / (double)t.size();
}

double var_of(const Tensor& t) {
    double m = mean_of(t), s = 0.0;
    for (size_t i = 0; i < t.size(); ++i) s += (t[i] - m) * (t[i] - m);
    return s / (double)t.size();
}

} // namespace

TEST_CASE("gaussian noise severity 3 matches its moment oracle") {
    Tensor img = constant_image(64, 64, 0.5);
    CorruptionSpec spec{CorruptionKind::GaussianNoise, 3, 11, 0};
    Tensor out = corrupt(img, spec);
    Tensor delta({1, 64, 64});
    for (size_t i = 0; i < out.size(); ++i) delta[i] = out[i] - img[i];
    CHECK(std::fabs(mean_of(delta)) < 0.01);
    CHECK(std::sqrt(var_of(delta)) == doctest::Approx(0.12).epsilon(0.08));
}

TEST_CASE("shot noise variance tracks the photon scale") {
    Tensor img = constant_image(64, 64, 0.5);
    CorruptionSpec spec{CorruptionKind::ShotNoise, 1, 12, 0};
    Tensor out = corrupt(img, spec);
    Tensor delta({1, 64, 64});
    for (size_t i = 0; i < out.size(); ++i) delta[i] = out[i] - img[i];
    // sigma = sqrt(0.5 / 60)
    CHECK(std::sqrt(var_of(delta)) == doctest::Approx(std::sqrt(0.5 / 60.0)).epsilon(0.1));
}

TEST_CASE("impulse noise flips roughly p pixels to pure black or white") {
    Tensor img = constant_image(64, 64, 0.5);
    CorruptionSpec spec{CorruptionKind::ImpulseNoise, 4, 13, 0}; // p = 0.09
    Tensor out = corrupt(img, spec);
    size_t flipped = 0, black = 0, white = 0;
    for (size_t i = 0; i < out.size(); ++i) {
        if (out[i] != 0.5) {
            ++flipped;
            if (out[i] == 0.0) ++black;
            if (out[i] == 1.0) ++white;
        }
    }
    CHECK(black + white == flipped); // flips go to the extremes only
    double rate = (double)flipped / (double)out.size();
    CHECK(rate == doctest::Approx(0.09).epsilon(0.25));
    CHECK(black > 0);
    CHECK(white > 0);
}

TEST_CASE("speckle noise is zero on a black image") {
    Tensor img = constant_image(16, 16, 0.0);
    CorruptionSpec spec{CorruptionKind::SpeckleNoise, 5, 14, 0};
    Tensor out = corrupt(img, spec);
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("blur preserves constants and the mean, reduces variance") {
    Tensor flat = constant_image(16, 16, 0.37);
    CorruptionSpec spec{CorruptionKind::GaussianBlur, 3, 15, 0};
    Tensor out = corrupt(flat, spec);
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(0.37).epsilon(1e-12));

    Tensor img = random_image(32, 32, 16, 0.1, 0.9);
    Tensor blurred = corrupt(img, spec);
    CHECK(mean_of(blurred) == doctest::Approx(mean_of(img)).epsilon(1e-9));
    CHECK(var_of(blurred) < var_of(img));
}

TEST_CASE("contrast scales variance around the channel mean") {
    Tensor img = random_image(32, 32, 17, 0.3, 0.7);
    CorruptionSpec spec{CorruptionKind::Contrast, 5, 18, 0}; // factor 0.15
    Tensor out = corrupt(img, spec);
    CHECK(mean_of(out) == doctest::Approx(mean_of(img)).epsilon(1e-9));
    CHECK(var_of(out) == doctest::Approx(0.15 * 0.15 * var_of(img)).epsilon(1e-9));
    // a constant image is a fixed point
    Tensor flat = constant_image(8, 8, 0.6);
    CHECK(max_abs_diff(corrupt(flat, spec), flat) < 1e-12);
}

TEST_CASE("brightness adds a pure offset away from the clip boundary") {
    Tensor img = random_image(16, 16, 19, 0.1, 0.6);
    CorruptionSpec spec{CorruptionKind::Brightness, 1, 20, 0}; // +0.05
    Tensor out = corrupt(img, spec);
    for (size_t i = 0; i < img.size(); ++i)
        CHECK(out[i] == doctest::Approx(img[i] + 0.05).epsilon(1e-12));
}

TEST_CASE("saturate is the identity on single-channel images") {
    Tensor img = random_image(16, 16, 21);
    CorruptionSpec spec{CorruptionKind::Saturate, 5, 22, 0};
    CHECK(max_abs_diff(corrupt(img, spec), img) == 0.0);
}

TEST_CASE("saturate preserves the per-pixel channel mean on rgb") {
    Tensor img = random_image(8, 8, 23, 0.3, 0.7, 3);
    CorruptionSpec spec{CorruptionKind::Saturate, 2, 24, 0};
    Tensor out = corrupt(img, spec);
    for (size_t y = 0; y < 8; ++y)
        for (size_t x = 0; x < 8; ++x) {
            double m1 = 0, m2 = 0;
            for (size_t c = 0; c < 3; ++c) {
                m1 += img.at3(c, y, x);
                m2 += out.at3(c, y, x);
            }
            CHECK(m2 == doctest::Approx(m1).epsilon(1e-9));
        }
}

TEST_CASE("pixelate commutes with nearest-neighbor downsampling") {
    Tensor img = random_image(32, 32, 25);
    CorruptionSpec spec{CorruptionKind::Pixelate, 5, 26, 0}; // block size 8
    Tensor out = corrupt(img, spec);
    const size_t k = 8;
    for (size_t y = 0; y < 32; y += k)
        for (size_t x = 0; x < 32; x += k) {
            // the whole block carries the original top-left value
            for (size_t dy = 0; dy < k; ++dy)
                for (size_t dx = 0; dx < k; ++dx)
                    CHECK(out.at3(0, y + dy, x + dx) == img.at3(0, y, x));
        }
}

TEST_CASE("all corruptions stay in [0,1] at every severity") {
    Tensor img = random_image(16, 16, 27);
    for (CorruptionKind k : kAllCorruptions)
        for (int sev = 1; sev <= 5; ++sev) {
            Tensor out = corrupt(img, CorruptionSpec{k, sev, 28, 3});
            CHECK(out.shape() == img.shape());
            for (size_t i = 0; i < out.size(); ++i) {
                CHECK(out[i] >= 0.0);
                CHECK(out[i] <= 1.0);
            }
        }
}

TEST_CASE("noise corruptions drift monotonically with severity") {
    Tensor img = constant_image(64, 64, 0.5);
    for (CorruptionKind k : {CorruptionKind::GaussianNoise, CorruptionKind::ImpulseNoise,
                             CorruptionKind::SpeckleNoise}) {
        double prev = -1.0;
        for (int sev = 1; sev <= 5; ++sev) {
            Tensor out = corrupt(img, CorruptionSpec{k, sev, 29, 0});
            double dist = frobenius_norm(sub(out, img));
            CHECK(dist > prev);
            prev = dist;
        }
    }
}

TEST_CASE("corruption streams are keyed by seed, image id and severity") {
    Tensor img = random_image(16, 16, 30);
    CorruptionSpec a{CorruptionKind::GaussianNoise, 2, 7, 3};
    Tensor o1 = corrupt(img, a);
    Tensor o2 = corrupt(img, a);
    CHECK(max_abs_diff(o1, o2) == 0.0);

    CorruptionSpec b = a;
    b.image_id = 4;
    CHECK(max_abs_diff(corrupt(img, b), o1) > 0.0);
    CorruptionSpec c = a;
    c.seed = 8;
    CHECK(max_abs_diff(corrupt(img, c), o1) > 0.0);
}

TEST_CASE("spec validation rejects out-of-range severity and bad shapes") {
    Tensor img = random_image(8, 8, 31);
    CHECK_THROWS_AS(corrupt(img, CorruptionSpec{CorruptionKind::GaussianNoise, 0, 0, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(corrupt(img, CorruptionSpec{CorruptionKind::GaussianNoise, 6, 0, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(corrupt(Tensor({8, 8}), CorruptionSpec{}), std::invalid_argument);
}

TEST_CASE("severity ladders serialize, reload, and reject short entries") {
    SeverityLadders l;
    l.gaussian_noise[0] = 0.123;
    SeverityLadders back = SeverityLadders::from_json(l.to_json());
    CHECK(back.version == l.version);
    CHECK(back.gaussian_noise[0] == 0.123);
    CHECK(back.pixelate == l.pixelate);

    const std::string path = "/tmp/fan_test_ladders.json";
    l.save(path);
    SeverityLadders loaded = SeverityLadders::load(path);
    CHECK(loaded.gaussian_noise[0] == 0.123);
    std::remove(path.c_str());

    CHECK_THROWS(SeverityLadders::from_json("{\"version\":1,\"gaussian_noise\":[1,2]}"));
    CHECK_THROWS(SeverityLadders::load("/nonexistent/ladders.json"));
}

TEST_CASE("corruption kind names round trip") {
    for (CorruptionKind k : kAllCorruptions)
        CHECK(corruption_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(corruption_from_string("fog"), std::invalid_argument);
}

TEST_CASE("suite enumerates the full grid, writes files, and survives bad input") {
    std::vector<Tensor> images = {random_image(8, 8, 40), random_image(8, 8, 41)};
    std::vector<CorruptionKind> kinds = {CorruptionKind::GaussianNoise,
                                         CorruptionKind::Pixelate};
    std::vector<int> sevs = {1, 3};

    std::vector<Tensor> outputs;
    SuiteManifest m = corruption_suite(images, kinds, sevs, 99, "", &outputs);
    CHECK(m.entries.size() == 8);
    CHECK(outputs.size() == 8);
    for (const auto& e : m.entries) {
        CHECK(e.error.empty());
        CHECK(e.path.empty());
    }
    auto parsed = nlohmann::json::parse(m.to_json());
    CHECK(parsed["seed"] == 99);
    CHECK(parsed["entries"].size() == 8);

    // on-disk variant
    SuiteManifest md = corruption_suite(images, kinds, {2}, 99, "/tmp");
    for (const auto& e : md.entries) {
        CHECK(e.error.empty());
        std::ifstream f(e.path);
        CHECK(f.good());
        std::remove(e.path.c_str());
    }

    // a malformed image is recorded, not fatal
    images.push_back(Tensor({4, 4}));
    SuiteManifest mb = corruption_suite(images, kinds, {1}, 99, "", nullptr);
    size_t errors = 0;
    for (const auto& e : mb.entries)
        if (!e.error.empty()) ++errors;
    CHECK(errors == 2); // one per kind for the bad image
}
