#pragma once

#include <json.hpp>

namespace haarlab {

inline constexpr const char* kVersion = "0.1.0";

// Bumped when a module's numerical output changes for identical inputs.
inline nlohmann::json module_versions() {
    return {{"group_core", 1},      {"subgroup_catalog", 1},   {"measure_engine", 2}, {"inequality_suite", 1},
            {"transport_verifier", 1}, {"stability_probe", 1}, {"cli", 1}};
}

}  // namespace haarlab
