#pragma once

#include "muwarm/config.hpp"
#include "muwarm/ledger.hpp"
#include "muwarm/parameterization.hpp"

#include <json.hpp>

namespace muwarm {

using Json = nlohmann::json;

void to_json(Json& j, const ModelConfig& cfg);
void from_json(const Json& j, ModelConfig& cfg);
void to_json(Json& j, const Scheme& scheme);
void from_json(const Json& j, Scheme& scheme);
void to_json(Json& j, const RunLedger& ledger);
void from_json(const Json& j, RunLedger& ledger);

}  // namespace muwarm
