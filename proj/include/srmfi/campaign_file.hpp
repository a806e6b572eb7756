#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "srmfi/campaign.hpp"
#include "srmfi/faults.hpp"
#include "srmfi/network.hpp"

namespace srmfi {

inline constexpr int kCampaignFormatVersion = 1;

// One single-fault round per matching element of `layer`.
struct CompleteRequest
{
    std::string model;
    nlohmann::json params = nlohmann::json::object();
    int layer = -1;
    FaultDuration duration;

    bool operator==(const CompleteRequest &) const = default;
};

// Declarative campaign. Layers are stored as indices; a name that does not
// resolve becomes -1 so that the fault is dropped during preparation.
struct CampaignSpec
{
    std::string model;   // network header, relative to the config file
    std::string dataset; // dataset manifest, relative to the config file
    CampaignOptions options;
    std::vector<std::vector<FaultDescriptor>> rounds;
    std::vector<CompleteRequest> complete;

    bool operator==(const CampaignSpec &) const = default;
};

// Errors carry the JSON location of the offending field. Unknown model names
// and invalid model parameters are rejected here.
CampaignSpec parse_campaign_spec(std::string_view text, const Network &net,
        const FaultModelRegistry &registry = FaultModelRegistry::with_builtins());
std::string format_campaign_spec(const CampaignSpec &spec);
void save_campaign_spec(const CampaignSpec &spec, const std::filesystem::path &path);

// Explicit rounds first, then the complete requests in order.
Campaign build_campaign(const CampaignSpec &spec, Network net,
        const FaultModelRegistry &registry = FaultModelRegistry::with_builtins());

struct LoadedCampaign
{
    CampaignSpec spec;
    Network network;
    Campaign campaign;
    std::filesystem::path dataset;
};

LoadedCampaign parse_campaign(const std::filesystem::path &path,
        const FaultModelRegistry &registry = FaultModelRegistry::with_builtins());

} // namespace srmfi
