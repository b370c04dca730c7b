#include <doctest.h>

#include "formstruct/errors.hpp"

#include <cmath>

#include "formstruct/visual_encoder.hpp"

#include "test_util.hpp"

using namespace formstruct;
using testutil::gradcheck_max_rel_err;

namespace {

VisualSpec toy_spec() {
    VisualSpec spec;
    spec.input_height = 8;
    spec.min_width = 8;
    spec.max_width = 64;
    spec.channels = {3, 4};
    spec.out_dim = 8;  // hidden 4 per direction
    return spec;
}

VisualSpec default_spec() {
    VisualSpec spec;  // H_in=32, 5 blocks, width factor 4
    spec.out_dim = 12;
    spec.channels = {4, 6, 6, 8, 8};
    return spec;
}

}  // namespace

TEST_CASE("crop_and_resize: aspect-preserving height normalization") {
    VisualSpec spec = default_spec();
    Image page(512, 512, 1.0f);
    RectClosure rc{10, 10, 266, 74};  // 256x64 region
    ImageCrop crop = crop_and_resize(page, rc, spec, 3);
    CHECK(crop.pixels.height == 32);
    CHECK(crop.pixels.width == 128);
    CHECK(crop.fragment_id == 3);
}

TEST_CASE("crop_and_resize: narrow crops pad with background to W_min") {
    VisualSpec spec = default_spec();
    Image page(256, 256, 0.0f);  // all-ink page so the pad is visible
    RectClosure rc{0, 0, 8, 32};
    ImageCrop crop = crop_and_resize(page, rc, spec, 0);
    CHECK(crop.pixels.height == 32);
    CHECK(crop.pixels.width == 32);
    CHECK(crop.pixels.at(2, 16) == doctest::Approx(0.0f));   // resized content
    CHECK(crop.pixels.at(31, 16) == doctest::Approx(1.0f));  // background pad
}

TEST_CASE("crop_and_resize: closures partially outside the page are clamped") {
    VisualSpec spec = default_spec();
    Image page(100, 100, 1.0f);
    RectClosure rc{-20, -10, 50, 40};
    ImageCrop crop = crop_and_resize(page, rc, spec, 0);
    CHECK(crop.pixels.height == 32);
    CHECK(crop.pixels.width >= spec.min_width);
}

TEST_CASE("crop_and_resize: missing page image tells the caller to disable the modality") {
    VisualSpec spec = default_spec();
    try {
        crop_and_resize(Image{}, RectClosure{0, 0, 10, 10}, spec, 0);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("visual modality") != std::string::npos);
    }
}

TEST_CASE("crop widths clamp to W_max and pad to the width stride") {
    VisualSpec spec = default_spec();
    spec.max_width = 64;
    Image wide(1000, 20, 0.5f);
    ImageCrop crop = prepare_crop(wide, spec);
    CHECK(crop.pixels.width == 64);
    Image odd(33, 32, 0.5f);
    ImageCrop crop2 = prepare_crop(odd, spec);
    CHECK(crop2.pixels.width % 4 == 0);
}

TEST_CASE("visual encoder: sequence length and output dimension") {
    Rng rng(1);
    VisualSpec spec = default_spec();
    VisualEncoder enc(spec, rng);
    // H_in=32, width 128, height factor 32, width factor 4 -> 32 frames.
    CHECK(enc.sequence_length(128) == 32);
    ImageCrop crop{Image(128, 32, 0.3f), 0};
    Tape tape(false);
    std::vector<Tape::Id> states;
    Tape::Id v = enc.encode_with_states(tape, crop, &states);
    CHECK(tape.val(v).dim(0) == spec.out_dim);
    CHECK(states.size() == 32);
}

TEST_CASE("visual encoder: all-background crop still yields a finite vector") {
    Rng rng(2);
    VisualEncoder enc(default_spec(), rng);
    ImageCrop crop{Image(64, 32, 1.0f), 0};  // pure background = zero input
    Tape tape(false);
    const Tensor& v = tape.val(enc.encode(tape, crop));
    REQUIRE(v.dim(0) == 12);
    for (double x : v.data) CHECK(std::isfinite(x));
}

TEST_CASE("visual encoder: output length holds across widths (variable-width contract)") {
    Rng rng(3);
    VisualEncoder enc(default_spec(), rng);
    Tape tape(false);
    for (int w : {32, 64, 92, 128, 256}) {
        ImageCrop crop{Image((w + 3) / 4 * 4, 32, 0.7f), 0};
        CHECK(tape.val(enc.encode(tape, crop)).dim(0) == 12);
    }
}

TEST_CASE("visual encoder: max pooling dominance over recurrent states") {
    Rng rng(4);
    VisualEncoder enc(default_spec(), rng);
    ImageCrop crop{Image(64, 32, 1.0f), 0};
    for (int x = 8; x < 24; ++x)
        for (int y = 8; y < 24; ++y) crop.pixels.set(x, y, 0.0f);
    Tape tape(false);
    std::vector<Tape::Id> states;
    Tape::Id v = enc.encode_with_states(tape, crop, &states);
    const Tensor& out = tape.val(v);
    for (int d = 0; d < out.dim(0); ++d) {
        double mx = -1e300;
        for (Tape::Id s : states) mx = std::max(mx, tape.val(s)[d]);
        CHECK(out[d] == doctest::Approx(mx).epsilon(1e-12));
    }
}

TEST_CASE("visual encoder: translation by one downsample stride over solid background") {
    Rng rng(5);
    VisualEncoder enc(default_spec(), rng);
    // Content well inside the crop, shifted right by one full stride (4 px).
    // Long solid-background runs on both sides let the recurrent transients
    // settle to their fixed point before/after the content frames.
    auto make = [&](int offset) {
        Image img(512, 32, 1.0f);
        for (int x = 0; x < 16; ++x)
            for (int y = 10; y < 22; ++y)
                img.set(248 + offset + x, y, (x + y) % 3 == 0 ? 0.0f : 0.4f);
        return ImageCrop{std::move(img), 0};
    };
    Tape tape(false);
    const Tensor& a = tape.val(enc.encode(tape, make(0)));
    const Tensor& b = tape.val(enc.encode(tape, make(4)));
    for (int d = 0; d < a.dim(0); ++d) CHECK(a[d] == doctest::Approx(b[d]).epsilon(1e-5));
}

TEST_CASE("visual encoder: gradient check at toy size") {
    Rng rng(6);
    VisualEncoder enc(toy_spec(), rng);
    std::vector<Param*> params;
    enc.collect_params(params);
    ImageCrop crop{Image(16, 8, 1.0f), 0};
    Rng pix(99);
    for (int x = 0; x < 16; ++x)
        for (int y = 0; y < 8; ++y) crop.pixels.set(x, y, static_cast<float>(pix.next_double()));
    auto build = [&](Tape& t) {
        Tape::Id v = enc.encode(t, crop);
        return t.sum(t.tanh_(v));
    };
    CHECK(gradcheck_max_rel_err(params, build, 1e-5) < 1e-3);
}

TEST_CASE("visual encoder: unregistered external backbone is a config error") {
    Rng rng(7);
    VisualSpec spec = default_spec();
    spec.backbone = "resnet50_modified";
    CHECK_THROWS_AS(VisualEncoder(spec, rng), ConfigError);
}

TEST_CASE("visual encoder: registered external backbone feeds the recurrent head") {
    register_visual_backbone("test-columns", 5, [](const Image& img) {
        std::vector<std::vector<double>> cols;
        for (int x = 0; x + 4 <= img.width; x += 4) {
            std::vector<double> c(5, 0.0);
            for (int y = 0; y < img.height; ++y) c[static_cast<size_t>(y) % 5] += 1.0 - img.at(x, y);
            cols.push_back(std::move(c));
        }
        return cols;
    });
    Rng rng(8);
    VisualSpec spec = default_spec();
    spec.backbone = "test-columns";
    VisualEncoder enc(spec, rng);
    ImageCrop crop{Image(64, 32, 0.2f), 0};
    Tape tape(false);
    CHECK(tape.val(enc.encode(tape, crop)).dim(0) == 12);
}

TEST_CASE("visual spec validation") {
    VisualSpec spec = default_spec();
    spec.out_dim = 13;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = default_spec();
    spec.input_height = 7;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = default_spec();
    spec.min_width = 100;
    spec.max_width = 50;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}
