#include "matforge/image.hpp"

#include <png.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "matforge/error.hpp"

namespace matforge {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void write_file_atomic(const std::filesystem::path &path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_pfm(const std::filesystem::path &path, const Image &img) {
    if (img.channels != 1 && img.channels != 3) throw Error("PFM supports 1 or 3 channels");
    const std::string header = std::string(img.channels == 3 ? "PF" : "Pf") + "\n" + std::to_string(img.width) +
                               " " + std::to_string(img.height) + "\n-1.0\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
    std::vector<float> line(row);
    for (int y = img.height - 1; y >= 0; --y) {
        for (std::size_t i = 0; i < row; ++i) line[i] = static_cast<float>(img.data[y * row + i]);
        const auto *p = reinterpret_cast<const std::uint8_t *>(line.data());
        bytes.insert(bytes.end(), p, p + row * sizeof(float));
    }
    write_file_atomic(path, bytes);
}

Image read_pfm(const std::filesystem::path &path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    // Header is three whitespace-separated tokens after the magic, each line-terminated.
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
        return t;
    };
    const std::string magic = token();
    int channels = 0;
    if (magic == "PF")
        channels = 3;
    else if (magic == "Pf")
        channels = 1;
    else
        throw ParseError("not a PFM file: " + path.string());
    int width = 0, height = 0;
    double scale = 0;
    try {
        width = std::stoi(token());
        height = std::stoi(token());
        scale = std::stod(token());
    } catch (const std::exception &) {
        throw ParseError("bad PFM header: " + path.string());
    }
    ++pos;  // single whitespace byte before the raster
    if (width <= 0 || height <= 0 || scale == 0) throw ParseError("bad PFM header: " + path.string());
    const std::size_t row = static_cast<std::size_t>(width) * channels;
    if (bytes.size() < pos + row * height * sizeof(float)) throw ParseError("truncated PFM: " + path.string());
    Image img(width, height, channels);
    const bool big_endian = scale > 0;
    for (int y = 0; y < height; ++y) {
        const std::size_t dst_row = static_cast<std::size_t>(height - 1 - y);
        for (std::size_t i = 0; i < row; ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, bytes.data() + pos + (y * row + i) * sizeof(float), sizeof(bits));
            if (big_endian) bits = __builtin_bswap32(bits);
            img.data[dst_row * row + i] = static_cast<double>(std::bit_cast<float>(bits));
        }
    }
    return img;
}

void write_png(const std::filesystem::path &path, const Image &img) {
    if (img.channels != 1 && img.channels != 3) throw Error("PNG writer supports 1 or 3 channels");
    std::vector<std::uint8_t> pixels(img.data.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = quantize_unorm8(img.data[i]);

    png_image desc;
    std::memset(&desc, 0, sizeof(desc));
    desc.version = PNG_IMAGE_VERSION;
    desc.width = static_cast<png_uint_32>(img.width);
    desc.height = static_cast<png_uint_32>(img.height);
    desc.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&desc, nullptr, &size, 0, pixels.data(), 0, nullptr))
        throw IoError(std::string("PNG encode failed: ") + desc.message);
    std::vector<std::uint8_t> encoded(size);
    if (!png_image_write_to_memory(&desc, encoded.data(), &size, 0, pixels.data(), 0, nullptr))
        throw IoError(std::string("PNG encode failed: ") + desc.message);
    encoded.resize(size);
    write_file_atomic(path, encoded);
}

Image read_png(const std::filesystem::path &path) {
    png_image desc;
    std::memset(&desc, 0, sizeof(desc));
    desc.version = PNG_IMAGE_VERSION;
    const std::string name = path.string();
    if (!png_image_begin_read_from_file(&desc, name.c_str())) throw IoError("cannot read PNG: " + name);
    const bool gray = (desc.format & PNG_FORMAT_FLAG_COLOR) == 0;
    desc.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(desc));
    if (!png_image_finish_read(&desc, nullptr, pixels.data(), 0, nullptr)) {
        png_image_free(&desc);
        throw IoError("cannot decode PNG: " + name);
    }
    Image img(static_cast<int>(desc.width), static_cast<int>(desc.height), gray ? 1 : 3);
    for (std::size_t i = 0; i < pixels.size(); ++i) img.data[i] = pixels[i] / 255.0;
    return img;
}

}  // namespace matforge
