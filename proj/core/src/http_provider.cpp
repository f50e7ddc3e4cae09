#include <httplib.h>

#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>

#include "matforge/guidance.hpp"

namespace matforge {

struct HttpProvider::Impl {
    std::unique_ptr<httplib::Client> client;
    std::string prefix;  // path part of the url without a trailing slash
};

namespace {

std::string error_detail(const httplib::Result &res) {
    if (!res) return httplib::to_string(res.error());
    std::string detail = "HTTP " + std::to_string(res->status);
    const auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (!body.is_discarded() && body.is_object() && body.contains("error"))
        detail += ": " + body["error"].dump();
    return detail;
}

}  // namespace

HttpProvider::HttpProvider(std::string url, HttpProviderOptions options)
    : url_(std::move(url)), impl_(std::make_unique<Impl>()) {
    const auto scheme_end = url_.find("://");
    if (scheme_end == std::string::npos || url_.substr(0, scheme_end) != "http")
        throw Error("guidance url must start with http://: " + url_);
    const auto path_start = url_.find('/', scheme_end + 3);
    const std::string host = url_.substr(0, path_start);
    if (path_start != std::string::npos) {
        impl_->prefix = url_.substr(path_start);
        while (!impl_->prefix.empty() && impl_->prefix.back() == '/') impl_->prefix.pop_back();
    }
    impl_->client = std::make_unique<httplib::Client>(host);
    if (!impl_->client->is_valid()) throw Error("invalid guidance url: " + url_);
    const auto to_duration = [](double s) {
        return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(s));
    };
    impl_->client->set_connection_timeout(to_duration(options.connect_timeout_s));
    impl_->client->set_read_timeout(to_duration(options.read_timeout_s));
    impl_->client->set_write_timeout(to_duration(options.read_timeout_s));
}

HttpProvider::~HttpProvider() = default;

ProviderHealth HttpProvider::health() {
    ProviderHealth h;
    const auto res = impl_->client->Get(impl_->prefix + "/health");
    if (!res) {
        h.status = httplib::to_string(res.error());
        return h;
    }
    h.http_status = res->status;
    const auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_object()) {
        h.status = body.value("status", std::string{});
        h.model_id = body.value("model_id", std::string{});
        h.ready = res->status == 200 && body.value("ready", false);
    }
    return h;
}

Image HttpProvider::predict_noise(const GuidanceRequest &request) {
    if (!request.image || request.image->channels != 3) throw Error("guidance request needs an RGB image");
    const Image &img = *request.image;
    nlohmann::json body = {{"image", base64_encode(float32_bytes(img))},
                           {"width", img.width},
                           {"height", img.height},
                           {"t", request.t},
                           {"slot", to_string(request.slot)},
                           {"prompt", request.prompt},
                           {"negative_prompt", request.negative_prompt},
                           {"control_scale", request.control_scale}};
    body["condition"] = request.condition ? base64_encode(request.condition->serialize()) : std::string{};

    const auto res = impl_->client->Post(impl_->prefix + "/predict_noise", body.dump(), "application/json");
    if (!res || res->status != 200) throw ProviderError("predict_noise failed: " + error_detail(res));
    const auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("noise") || !reply["noise"].is_string())
        throw ProviderError("predict_noise: response is missing the noise payload");
    Image noise;
    try {
        noise = image_from_float32(base64_decode(reply["noise"].get<std::string>()), img.width, img.height, 3);
    } catch (const Error &e) {
        throw ProviderError(std::string("predict_noise: ") + e.what());
    }
    for (double v : noise.data)
        if (!std::isfinite(v)) throw ProviderError("predict_noise: non-finite noise values");
    if (reply.contains("model_id") && reply["model_id"].is_string()) model_id_ = reply["model_id"].get<std::string>();
    return noise;
}

}  // namespace matforge
