#include "formstruct/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "formstruct/errors.hpp"

namespace formstruct {

namespace {

// Per-axis coverage weights of one destination cell over source cells.
struct AxisMap {
    std::vector<int> begin;
    std::vector<std::vector<double>> w;
};

AxisMap build_axis(int src_n, int dst_n) {
    AxisMap m;
    m.begin.resize(static_cast<size_t>(dst_n));
    m.w.resize(static_cast<size_t>(dst_n));
    const double scale = static_cast<double>(src_n) / dst_n;
    for (int d = 0; d < dst_n; ++d) {
        double lo = d * scale;
        double hi = (d + 1) * scale;
        int s0 = static_cast<int>(std::floor(lo));
        int s1 = std::min(src_n - 1, static_cast<int>(std::ceil(hi)) - 1);
        s0 = std::min(s0, s1);
        m.begin[static_cast<size_t>(d)] = s0;
        auto& ws = m.w[static_cast<size_t>(d)];
        double total = 0.0;
        for (int s = s0; s <= s1; ++s) {
            double cover = std::max(0.0, std::min<double>(hi, s + 1) - std::max<double>(lo, s));
            ws.push_back(cover);
            total += cover;
        }
        if (total <= 0.0) {
            ws.assign(ws.size(), 0.0);
            ws[0] = 1.0;
        } else {
            for (auto& v : ws) v /= total;
        }
    }
    return m;
}

}  // namespace

Image resize(const Image& src, int new_w, int new_h) {
    if (src.empty() || new_w <= 0 || new_h <= 0)
        throw ValidationError("resize: empty image or non-positive target size");
    if (new_w == src.width && new_h == src.height) return src;
    AxisMap xs = build_axis(src.width, new_w);
    AxisMap ys = build_axis(src.height, new_h);
    std::vector<double> tmp(static_cast<size_t>(new_w) * src.height);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < new_w; ++x) {
            const auto& ws = xs.w[static_cast<size_t>(x)];
            int s0 = xs.begin[static_cast<size_t>(x)];
            double acc = 0.0;
            for (size_t k = 0; k < ws.size(); ++k) acc += ws[k] * src.at(s0 + static_cast<int>(k), y);
            tmp[static_cast<size_t>(y) * new_w + x] = acc;
        }
    }
    Image out(new_w, new_h, 0.0f);
    for (int y = 0; y < new_h; ++y) {
        const auto& ws = ys.w[static_cast<size_t>(y)];
        int s0 = ys.begin[static_cast<size_t>(y)];
        for (int x = 0; x < new_w; ++x) {
            double acc = 0.0;
            for (size_t k = 0; k < ws.size(); ++k)
                acc += ws[k] * tmp[(static_cast<size_t>(s0) + k) * new_w + x];
            out.set(x, y, static_cast<float>(acc));
        }
    }
    return out;
}

Image crop_rect(const Image& src, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > src.width || y0 + h > src.height)
        throw ValidationError("crop_rect out of bounds");
    Image out(w, h, 0.0f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.px[static_cast<size_t>(y) * w + x] = src.px[static_cast<size_t>(y0 + y) * src.width + (x0 + x)];
    return out;
}

Image read_png(const std::string& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), std::fclose);
    if (!fp) throw IoError("cannot open image: " + path);
    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
        throw ParseError("not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed");
    }
    std::vector<png_bytep> rows;
    std::vector<png_byte> buf;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("PNG decode failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if ((png_get_color_type(png, info) & PNG_COLOR_MASK_COLOR) != 0)
        png_set_rgb_to_gray(png, 1, -1, -1);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const size_t stride = png_get_rowbytes(png, info);
    buf.resize(stride * static_cast<size_t>(h));
    rows.resize(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = buf.data() + stride * static_cast<size_t>(y);
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    Image out(w, h, 0.0f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.px[static_cast<size_t>(y) * w + x] = buf[stride * static_cast<size_t>(y) + x];
    return out;
}

void write_png(const Image& img, const std::string& path) {
    if (img.empty()) throw ValidationError("write_png: empty image");
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), std::fclose);
    if (!fp) throw IoError("cannot create image: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed");
    }
    std::vector<png_bytep> rows(static_cast<size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<size_t>(y)] =
            const_cast<png_bytep>(img.px.data() + static_cast<size_t>(y) * img.width);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace formstruct
