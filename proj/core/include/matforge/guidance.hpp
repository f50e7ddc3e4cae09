#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "matforge/condition_maps.hpp"
#include "matforge/error.hpp"
#include "matforge/image.hpp"

namespace matforge {

enum class PromptSlot { positive, null, negative };

std::string_view to_string(PromptSlot slot);
PromptSlot prompt_slot_from_string(std::string_view s);

/// One noise-prediction query. Pointers are borrowed for the duration of the call.
struct GuidanceRequest {
    const Image *image = nullptr;  // noisy display image I_t, H x W x 3
    int t = 1;
    PromptSlot slot = PromptSlot::positive;
    std::string prompt;
    std::string negative_prompt;
    const ConditionStack *condition = nullptr;
    double control_scale = 1.0;

    // In-process extras. Remote providers ignore these.
    double alpha_bar = 1.0;
    std::size_t view = 0;                // manifest entry index
    const Image *clean_image = nullptr;  // current display image before noising, detached
};

/// Raised for failures worth retrying (transport errors, bad responses).
class ProviderError : public Error {
public:
    using Error::Error;
};

class GuidanceProvider {
public:
    virtual ~GuidanceProvider() = default;
    /// H x W x 3 noise prediction for `request.image`.
    virtual Image predict_noise(const GuidanceRequest &request) = 0;
    virtual std::string name() const = 0;
};

/// Test double for the noise predictor: explains I_t as a noised copy of a
/// known target view. Positive prompts see the target; null and negative
/// prompts see the current clean image, so the CSD residual becomes a pull
/// toward the target.
class SyntheticOracle final : public GuidanceProvider {
public:
    /// `targets[i]` is the display-space target for manifest entry i.
    explicit SyntheticOracle(std::vector<Image> targets) : targets_(std::move(targets)) {}

    Image predict_noise(const GuidanceRequest &request) override;
    std::string name() const override { return "synthetic-oracle"; }
    const std::vector<Image> &targets() const { return targets_; }

private:
    std::vector<Image> targets_;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws Error on characters outside the standard alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::vector<std::uint8_t> float32_bytes(const Image &img);
/// Inverse of float32_bytes for a known shape; throws ShapeMismatch on size mismatch.
Image image_from_float32(std::span<const std::uint8_t> bytes, int width, int height, int channels);

struct HttpProviderOptions {
    double connect_timeout_s = 5.0;
    double read_timeout_s = 300.0;
};

struct ProviderHealth {
    bool ready = false;
    int http_status = 0;
    std::string status;
    std::string model_id;
};

/// Client for the guidance wire protocol:
///   POST {url}/predict_noise  {image, width, height, t, slot, prompt,
///                              negative_prompt, condition, control_scale}
///   -> {noise, model_id, latency_ms}
///   GET  {url}/health -> {status, model_id, ready}
/// Payloads are base64 little-endian float32; the condition is a whole .cmap payload.
class HttpProvider final : public GuidanceProvider {
public:
    explicit HttpProvider(std::string url, HttpProviderOptions options = {});
    ~HttpProvider() override;

    Image predict_noise(const GuidanceRequest &request) override;
    std::string name() const override { return "http:" + url_; }
    ProviderHealth health();
    const std::string &model_id() const { return model_id_; }

private:
    struct Impl;
    std::string url_;
    std::string model_id_;
    std::unique_ptr<Impl> impl_;
};

}  // namespace matforge
