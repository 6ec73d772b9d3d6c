#include "doctest.h"

#include <cmath>
#include <set>

#include "fan/dataset.hpp"

using namespace fan;

TEST_CASE("shapes dataset is balanced, bounded, and sized per class") {
    ShapesDataset ds = gen_shapes(5, 32, 32, 0.3, 7);
    CHECK(ds.size() == 5 * kShapeClasses.size());
    CHECK(ds.images.size() == ds.labels.size());
    std::vector<size_t> counts(kShapeClasses.size(), 0);
    for (size_t l : ds.labels) {
        REQUIRE(l < kShapeClasses.size());
        counts[l]++;
    }
    for (size_t c : counts) CHECK(c == 5);
    for (const Tensor& img : ds.images) {
        REQUIRE(img.shape() == std::vector<size_t>{1, 32, 32});
        for (size_t i = 0; i < img.size(); ++i) {
            CHECK(img[i] >= 0.0);
            CHECK(img[i] <= 1.0);
        }
    }
}

TEST_CASE("noiseless images use the flat palette") {
    ShapesDataset ds = gen_shapes(2, 32, 32, 0.0, 3);
    for (const Tensor& img : ds.images) {
        double lo = 1e9, hi = -1e9;
        size_t fg = 0;
        for (size_t i = 0; i < img.size(); ++i) {
            lo = std::min(lo, img[i]);
            hi = std::max(hi, img[i]);
            if (img[i] > 0.55) ++fg;
        }
        CHECK(lo == doctest::Approx(0.25).epsilon(1e-9)); // background level
        CHECK(hi == doctest::Approx(0.85).epsilon(1e-9)); // shape level
        // the shape occupies a sane fraction of the canvas
        CHECK(fg > img.size() / 50);
        CHECK(fg < img.size() * 3 / 4);
    }
}

TEST_CASE("same seed reproduces the dataset bit for bit") {
    ShapesDataset a = gen_shapes(3, 16, 16, 0.4, 11);
    ShapesDataset b = gen_shapes(3, 16, 16, 0.4, 11);
    REQUIRE(a.size() == b.size());
    CHECK(a.labels == b.labels);
    for (size_t i = 0; i < a.size(); ++i) CHECK(max_abs_diff(a.images[i], b.images[i]) == 0.0);
}

TEST_CASE("seed and split key independent streams") {
    ShapesDataset a = gen_shapes(3, 16, 16, 0.4, 11);
    ShapesDataset c = gen_shapes(3, 16, 16, 0.4, 12);
    ShapesDataset v = gen_shapes(3, 16, 16, 0.4, 11, "val");
    double diff_seed = 0.0, diff_split = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        diff_seed += max_abs_diff(a.images[i], c.images[i]);
        diff_split += max_abs_diff(a.images[i], v.images[i]);
    }
    CHECK(diff_seed > 0.0);
    CHECK(diff_split > 0.0);
    CHECK(v.split == "val");
}

TEST_CASE("images within a class still vary (position/scale/rotation)") {
    ShapesDataset ds = gen_shapes(4, 32, 32, 0.0, 21);
    for (size_t cls = 0; cls < kShapeClasses.size(); ++cls) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < ds.size(); ++i)
            if (ds.labels[i] == cls) idx.push_back(i);
        REQUIRE(idx.size() == 4);
        bool any_diff = false;
        for (size_t i = 1; i < idx.size(); ++i)
            if (max_abs_diff(ds.images[idx[0]], ds.images[idx[i]]) > 0.0) any_diff = true;
        CHECK(any_diff);
    }
}

TEST_CASE("noise raises the pixel spread") {
    auto spread = [](const ShapesDataset& ds) {
        double s = 0.0;
        size_t n = 0;
        for (const Tensor& img : ds.images) {
            double m = 0.0;
            for (size_t i = 0; i < img.size(); ++i) m += img[i];
            m /= (double)img.size();
            for (size_t i = 0; i < img.size(); ++i) s += (img[i] - m) * (img[i] - m);
            n += img.size();
        }
        return s / (double)n;
    };
    ShapesDataset clean = gen_shapes(3, 32, 32, 0.0, 31);
    ShapesDataset noisy = gen_shapes(3, 32, 32, 1.0, 31);
    CHECK(spread(noisy) > spread(clean));
}
