#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

namespace matforge::cli {

std::uint64_t fnv1a64(std::string_view bytes);

/// Record of one command invocation, written atomically as run_manifest.json.
class RunManifest {
public:
    RunManifest(std::string command, nlohmann::json config);

    void input(const std::string &name, const std::filesystem::path &path);
    void output(const std::string &name, const std::filesystem::path &path);
    void seed(const std::string &name, std::uint64_t value);
    /// Times the stage from the previous mark.
    void stage(const std::string &name, const std::string &status);
    void set(const std::string &key, nlohmann::json value) { extra_[key] = std::move(value); }

    /// Status is "ok" or "failed"; config_hash is FNV-1a 64 of the config's compact dump.
    void write(const std::filesystem::path &dir, const std::string &status) const;

private:
    using Clock = std::chrono::steady_clock;
    std::string command_;
    nlohmann::json config_;
    nlohmann::json inputs_ = nlohmann::json::object();
    nlohmann::json outputs_ = nlohmann::json::object();
    nlohmann::json seeds_ = nlohmann::json::object();
    nlohmann::json stages_ = nlohmann::json::array();
    nlohmann::json extra_ = nlohmann::json::object();
    Clock::time_point start_ = Clock::now();
    Clock::time_point mark_ = start_;
};

}  // namespace matforge::cli
