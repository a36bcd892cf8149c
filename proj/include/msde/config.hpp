#ifndef MSDE_CONFIG_HPP
#define MSDE_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "msde/mean_shift.hpp"

namespace msde {

/// Full pipeline configuration. Defaults reproduce the fixed published settings:
/// k=50, t_nbd=70, eta=0.33, T=8, tau=0.01, d'=256, lambda=1e-4.
struct MsdeConfig {
    ShiftParams shift;
    Index pca_dim = 256;
    double lambda = 1e-4;
    bool standardize = true;
    bool fit_on_joint = false;  // fit PCA/Gaussian on the joint-shifted train rows
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;
};

/// Config keys, in echo order.
const std::vector<std::string>& config_keys();

/// Sets one key from its text value. Keys use snake_case; kebab-case is accepted too.
void set_config_value(MsdeConfig& config, std::string_view key, std::string_view value);

/// Flat `key = value` text, one entry per line; `#` starts a comment. Values may be
/// quoted. Unknown keys are an error.
void apply_config_text(MsdeConfig& config, std::string_view text);
void apply_config_file(MsdeConfig& config, const std::filesystem::path& path);

/// Resolved `key = value` lines that apply_config_text reads back to the same config.
std::string config_to_text(const MsdeConfig& config);

}  // namespace msde

#endif  // MSDE_CONFIG_HPP
