#include "floodbench/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

namespace floodbench {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

ImageU8 make_image(int64_t channels, int64_t height, int64_t width) {
    if ((channels != 1 && channels != 3) || height <= 0 || width <= 0)
        throw ContractError("make_image: unsupported raster geometry");
    ImageU8 img;
    img.channels = channels;
    img.height = height;
    img.width = width;
    img.data.assign(static_cast<size_t>(channels * height * width), 0);
    return img;
}

void write_png(const std::string& path, const ImageU8& img) {
    if (img.channels != 1 && img.channels != 3)
        throw ContractError("write_png supports 1 or 3 channels, got " +
                            std::to_string(img.channels));
    if (img.data.size() !=
        static_cast<size_t>(img.channels * img.height * img.width))
        throw ContractError("write_png: raster buffer does not match dims");

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw DataError("cannot open " + path + " for writing");

    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng write-struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("libpng info-struct allocation failed");
    }
    // libpng reports errors by longjmp; everything it should clean up must be
    // allocated before this point.
    std::vector<uint8_t> row(static_cast<size_t>(img.width * img.channels));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng failed writing " + path);
    }

    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    for (int64_t y = 0; y < img.height; ++y) {
        for (int64_t x = 0; x < img.width; ++x)
            for (int64_t c = 0; c < img.channels; ++c)
                row[static_cast<size_t>(x * img.channels + c)] = img.at(c, y, x);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

ImageU8 read_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw DataError("cannot open " + path);

    png_byte header[8];
    if (std::fread(header, 1, 8, f.get()) != 8 || png_sig_cmp(header, 0, 8))
        throw DataError(path + " is not a PNG file");

    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng read-struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("libpng info-struct allocation failed");
    }
    // Buffers outlive the setjmp region so a longjmp never skips destructors.
    ImageU8 img;
    std::vector<uint8_t> row;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("libpng failed reading " + path);
    }

    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_packing(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    const int64_t width = png_get_image_width(png, info);
    const int64_t height = png_get_image_height(png, info);
    const int64_t channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError(path + " decodes to " + std::to_string(channels) +
                        " channels; expected 1 or 3");
    }

    img = make_image(channels, height, width);
    row.assign(static_cast<size_t>(width * channels), 0);
    for (int64_t y = 0; y < height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int64_t x = 0; x < width; ++x)
            for (int64_t c = 0; c < channels; ++c)
                img.at(c, y, x) = row[static_cast<size_t>(x * channels + c)];
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace floodbench
