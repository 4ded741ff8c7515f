#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "florist/fedsim.hpp"

namespace florist {

class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CliConfig {
    ExperimentConfig experiment;
    // sweep grid; defaults 0.80..1.00 step 0.01
    std::vector<double> taus;
    // cost-report client-count grid; defaults 2,4,8,16,32,64
    std::vector<std::size_t> client_grid;
};

/// Load a config file. TOML (subset: tables, scalar and array values) is
/// the primary format; a file whose first non-space byte is '{' is parsed
/// as JSON with the same keys.
CliConfig load_config(const std::filesystem::path& path);

/// Effective config (defaults resolved) as JSON text.
std::string effective_config_json(const CliConfig& cfg);

}  // namespace florist
