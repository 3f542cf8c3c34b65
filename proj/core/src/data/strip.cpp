#include "stnet/data/strip.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <vector>

#include "stnet/error.hpp"
#include "stnet/io.hpp"

namespace stnet {

namespace {

struct PngErrorState {
    std::string message;
};

void on_png_error(png_structp png, png_const_charp msg) {
    auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
    if (state) state->message = msg;
    png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

void append_bytes(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), n);
}

void flush_nothing(png_structp) {}

struct MemoryReader {
    const std::string* bytes;
    std::size_t pos;
};

void read_bytes(png_structp png, png_bytep data, png_size_t n) {
    auto* in = static_cast<MemoryReader*>(png_get_io_ptr(png));
    if (in->bytes->size() - in->pos < n) png_error(png, "unexpected end of PNG data");
    std::memcpy(data, in->bytes->data() + in->pos, n);
    in->pos += n;
}

}  // namespace

std::string encode_strip(const Clip& clip) {
    if (clip.pixels.rank() != 3) throw FormatError("strip clips must be [frames,height,width]");
    const std::size_t frames = clip.frames(), side = clip.height();
    if (clip.width() != side) throw FormatError("strip frames must be square, got " + to_string(clip.pixels.shape()));
    const std::size_t width = frames * side;

    std::vector<png_byte> rows(side * width * 2);
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t t = 0; t < frames; ++t) {
            for (std::size_t x = 0; x < side; ++x) {
                const double v = std::clamp(clip.pixels[(t * side + y) * side + x], 0.0, 1.0);
                const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
                png_byte* p = &rows[(y * width + t * side + x) * 2];
                p[0] = static_cast<png_byte>(q >> 8);
                p[1] = static_cast<png_byte>(q & 0xff);
            }
        }
    }

    std::string out;
    PngErrorState err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
    if (!png) throw IoError("cannot create PNG writer");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, info ? &info : nullptr);
        throw IoError("PNG encode failed: " + err.message);
    }
    png_set_write_fn(png, &out, append_bytes, flush_nothing);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(side), 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < side; ++y) png_write_row(png, &rows[y * width * 2]);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

Clip decode_strip(const std::string& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
        throw FormatError("not a PNG strip");
    }
    PngErrorState err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
    if (!png) throw IoError("cannot create PNG reader");
    png_infop info = png_create_info_struct(png);
    MemoryReader reader{&bytes, 0};
    std::vector<png_byte> rows;
    png_uint_32 width = 0, height = 0;
    int depth = 0;
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        throw FormatError("PNG decode failed: " + err.message);
    }
    png_set_read_fn(png, &reader, read_bytes);
    png_read_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    bool ok = color == PNG_COLOR_TYPE_GRAY && (depth == 8 || depth == 16);
    if (ok) {
        const std::size_t bpp = depth == 16 ? 2 : 1;
        rows.resize(static_cast<std::size_t>(width) * height * bpp);
        for (png_uint_32 y = 0; y < height; ++y) png_read_row(png, &rows[y * width * bpp], nullptr);
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (!ok) throw FormatError("strip must be 8- or 16-bit grayscale");
    if (height == 0 || width % height != 0) {
        throw FormatError("strip width " + std::to_string(width) + " is not a multiple of height " +
                          std::to_string(height));
    }

    const std::size_t side = height, frames = width / height;
    Clip clip;
    clip.pixels = Tensor({frames, side, side});
    const double scale = depth == 16 ? 65535.0 : 255.0;
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t col = 0; col < width; ++col) {
            const std::size_t t = col / side, x = col % side;
            const std::size_t at = y * width + col;
            const double q = depth == 16 ? (rows[at * 2] << 8 | rows[at * 2 + 1]) : rows[at];
            clip.pixels[(t * side + y) * side + x] = q / scale;
        }
    }
    return clip;
}

void strip_write(const Clip& clip, const std::string& path) { write_file_atomic(path, encode_strip(clip)); }

Clip strip_read(const std::string& path) {
    Clip clip = decode_strip(read_file(path));
    clip.id = path;
    return clip;
}

}  // namespace stnet
