#pragma once

#include <string>

#include "json.hpp"

#include "alseg/learner.hpp"

namespace alseg {

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

nlohmann::json to_json(const LearnerConfig& cfg);
LearnerConfig learner_config_from_json(const nlohmann::json& j);

}  // namespace alseg
