#pragma once

#include <functional>
#include <string>

#include "json_util.hpp"
#include "srmfi/campaign.hpp"
#include "srmfi/faults.hpp"

namespace srmfi::detail {

// Turns a layer reference (index or name) into an index.
using LayerResolver = std::function<int(const json &ref, const std::string &path)>;

int integer_layer(const json &ref, const std::string &path);

json options_to_json(const CampaignOptions &options);
CampaignOptions options_from_json(const json &v, const std::string &path);

json duration_to_json(const FaultDuration &duration);
FaultDuration duration_from_json(const json &v, const std::string &path);

json fault_to_json(const FaultDescriptor &fault);
FaultDescriptor fault_from_json(
        const json &v, const std::string &path, const LayerResolver &layer);

// Rejects members not in `allowed`.
void check_keys(const json &obj, const std::string &path,
        std::initializer_list<std::string_view> allowed);

} // namespace srmfi::detail
