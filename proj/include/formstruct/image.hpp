#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace formstruct {

// Grayscale raster stored as 8-bit samples (PNG-native depth), exposed as
// floats in [0,1]. 1.0 is paper white.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> px;

    Image() = default;
    Image(int w, int h, float fill = 1.0f)
        : width(w), height(h),
          px(static_cast<size_t>(w) * h, quantize(fill)) {}

    static uint8_t quantize(float v) {
        return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    }

    float at(int x, int y) const {
        return static_cast<float>(px[static_cast<size_t>(y) * width + x]) / 255.0f;
    }
    void set(int x, int y, float v) { px[static_cast<size_t>(y) * width + x] = quantize(v); }
    uint8_t raw(int x, int y) const { return px[static_cast<size_t>(y) * width + x]; }
    bool empty() const { return px.empty(); }
    bool operator==(const Image&) const = default;
};

// Exact-coverage area resampling; handles both up- and downscaling.
Image resize(const Image& src, int new_w, int new_h);

// Sub-rectangle copy; the rectangle must lie within the image.
Image crop_rect(const Image& src, int x0, int y0, int w, int h);

// PNG round trip via libpng. Readers convert any color type to 8-bit gray.
Image read_png(const std::string& path);
void write_png(const Image& img, const std::string& path);

}  // namespace formstruct
