#include "matforge/guidance.hpp"

#include <array>
#include <cmath>
#include <cstring>

namespace matforge {
namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

constexpr std::array<std::int8_t, 256> decode_table() {
    std::array<std::int8_t, 256> t{};
    for (auto &v : t) v = -1;
    for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(kAlphabet[i])] = static_cast<std::int8_t>(i);
    return t;
}

}  // namespace

std::string_view to_string(PromptSlot slot) {
    switch (slot) {
    case PromptSlot::positive: return "positive";
    case PromptSlot::null: return "null";
    case PromptSlot::negative: return "negative";
    }
    return "positive";
}

PromptSlot prompt_slot_from_string(std::string_view s) {
    if (s == "positive") return PromptSlot::positive;
    if (s == "null") return PromptSlot::null;
    if (s == "negative") return PromptSlot::negative;
    throw Error("unknown prompt slot: " + std::string(s));
}

Image SyntheticOracle::predict_noise(const GuidanceRequest &request) {
    if (!request.image) throw Error("guidance request without an image");
    const Image *reference = nullptr;
    if (request.slot == PromptSlot::positive) {
        if (request.view >= targets_.size())
            throw Error("synthetic oracle has no target for view " + std::to_string(request.view));
        reference = &targets_[request.view];
    } else {
        if (!request.clean_image) throw Error("synthetic oracle needs the clean image for null/negative slots");
        reference = request.clean_image;
    }
    if (!reference->same_shape(*request.image)) throw ShapeMismatch("oracle target shape differs from the image");
    const double sa = std::sqrt(request.alpha_bar);
    const double inv_s1 = 1.0 / std::sqrt(1.0 - request.alpha_bar);
    Image eps(request.image->width, request.image->height, request.image->channels);
    for (std::size_t i = 0; i < eps.data.size(); ++i)
        eps.data[i] = (request.image->data[i] - sa * reference->data[i]) * inv_s1;
    return eps;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    if (const std::size_t rest = bytes.size() - i; rest > 0) {
        std::uint32_t v = bytes[i] << 16;
        if (rest == 2) v |= bytes[i + 1] << 8;
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    static constexpr auto table = decode_table();
    if (text.size() % 4 != 0) throw Error("base64: length is not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        const bool last = i + 4 == text.size();
        int pad = 0;
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=' && last && k >= 2) {
                ++pad;
                v <<= 6;
                continue;
            }
            const int d = table[static_cast<unsigned char>(c)];
            if (d < 0 || pad > 0) throw Error("base64: invalid character");
            v = (v << 6) | static_cast<std::uint32_t>(d);
        }
        out.push_back(static_cast<std::uint8_t>(v >> 16));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
    }
    return out;
}

std::vector<std::uint8_t> float32_bytes(const Image &img) {
    std::vector<std::uint8_t> out(4 * img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const auto f = static_cast<float>(img.data[i]);
        std::memcpy(out.data() + 4 * i, &f, 4);
    }
    return out;
}

Image image_from_float32(std::span<const std::uint8_t> bytes, int width, int height, int channels) {
    Image img(width, height, channels);
    if (bytes.size() != 4 * img.data.size())
        throw ShapeMismatch("float32 payload holds " + std::to_string(bytes.size() / 4) + " values, expected " +
                            std::to_string(img.data.size()));
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        float f;
        std::memcpy(&f, bytes.data() + 4 * i, 4);
        img.data[i] = f;
    }
    return img;
}

}  // namespace matforge
