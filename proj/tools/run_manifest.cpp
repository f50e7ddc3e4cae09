#include "run_manifest.hpp"

#include <ctime>

#include "matforge/image.hpp"

namespace matforge::cli {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

RunManifest::RunManifest(std::string command, nlohmann::json config)
    : command_(std::move(command)), config_(std::move(config)) {}

void RunManifest::input(const std::string &name, const std::filesystem::path &path) { inputs_[name] = path.string(); }
void RunManifest::output(const std::string &name, const std::filesystem::path &path) {
    outputs_[name] = path.string();
}
void RunManifest::seed(const std::string &name, std::uint64_t value) { seeds_[name] = value; }

void RunManifest::stage(const std::string &name, const std::string &status) {
    const auto now = Clock::now();
    stages_.push_back(
        {{"name", name}, {"status", status}, {"seconds", std::chrono::duration<double>(now - mark_).count()}});
    mark_ = now;
}

void RunManifest::write(const std::filesystem::path &dir, const std::string &status) const {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(config_.dump())));
    nlohmann::json j = {{"command", command_},
                        {"status", status},
                        {"config", config_},
                        {"config_hash", hash},
                        {"seeds", seeds_},
                        {"inputs", inputs_},
                        {"outputs", outputs_},
                        {"stages", stages_},
                        {"timing", {{"started_unix", static_cast<std::int64_t>(std::time(nullptr)) -
                                                         static_cast<std::int64_t>(std::chrono::duration<double>(
                                                                                       Clock::now() - start_)
                                                                                       .count())},
                                    {"seconds", std::chrono::duration<double>(Clock::now() - start_).count()}}}};
    for (const auto &item : extra_.items()) j[item.key()] = item.value();
    std::filesystem::create_directories(dir);
    const std::string text = j.dump(2) + "\n";
    write_file_atomic(dir / "run_manifest.json",
                      std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

}  // namespace matforge::cli
