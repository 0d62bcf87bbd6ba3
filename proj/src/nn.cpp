#include "dcid/nn.hpp"

namespace dcid {

void ModelConfig::validate() const {
    if (scales != 3) throw ConfigError("model: scales is fixed at 3");
    if (static_cast<int>(channels.size()) != scales)
        throw ConfigError("model: channels must list one width per scale");
    for (size_t i = 1; i < channels.size(); ++i)
        if (channels[i] <= channels[i - 1])
            throw ConfigError("model: channels must be strictly increasing");
    if (kpa_groups < 1) throw ConfigError("model: kpa_groups must be >= 1");
    if (kpa_kernel_size % 2 == 0 || kpa_kernel_size < 1)
        throw ConfigError("model: kpa_kernel_size must be odd");
    if (sam_pyramid_levels < 1) throw ConfigError("model: sam_pyramid_levels must be >= 1");
}

Variant variant_from_string(const std::string& s) {
    if (s == "full" || s == "kma_kpa") return Variant::Full;
    if (s == "kma_only") return Variant::KmaOnly;
    if (s == "baseline") return Variant::Baseline;
    throw ConfigError("unknown variant: " + s + " (expected baseline|kma_only|kma_kpa)");
}

std::string variant_to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "kma_kpa";
        case Variant::KmaOnly: return "kma_only";
        case Variant::Baseline: return "baseline";
    }
    return "?";
}

}  // namespace dcid
