#pragma once

#include <cstdlib>
#include <filesystem>

#include <unistd.h>
#include <string>

namespace fixtures {

inline std::string path(const std::string& name) { return std::string(COOKIEGATE_FIXTURE_DIR) + "/" + name; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("cookiegate-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(std::rand()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fixtures
