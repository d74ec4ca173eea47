#include "alseg/serialize.hpp"

#include <stdexcept>

namespace alseg {

using nlohmann::json;

std::string to_string(LossKind kind) {
  return kind == LossKind::focal_dice ? "focal_dice" : "dice_bce";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "focal_dice" || name == "focal-dice") return LossKind::focal_dice;
  if (name == "dice_bce" || name == "dice-bce") return LossKind::dice_bce;
  throw std::invalid_argument("unknown loss '" + name + "' (expected focal_dice or dice_bce)");
}

json to_json(const LearnerConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate},
          {"loss", to_string(cfg.loss.kind)},
          {"gamma", cfg.loss.gamma},
          {"normalize_bce", cfg.loss.normalize_bce},
          {"channels", {cfg.shape.c1, cfg.shape.c2, cfg.shape.bottleneck}},
          {"activation", cfg.shape.activation == Activation::relu ? "relu" : "identity"},
          {"seed", cfg.seed},
          {"batch_size", cfg.batch_size},
          {"beta1", cfg.beta1},
          {"beta2", cfg.beta2},
          {"adam_epsilon", cfg.adam_epsilon}};
}

LearnerConfig learner_config_from_json(const json& j) {
  LearnerConfig cfg;
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.loss.kind = loss_kind_from_string(j.at("loss").get<std::string>());
  cfg.loss.gamma = j.at("gamma").get<double>();
  cfg.loss.normalize_bce = j.at("normalize_bce").get<bool>();
  const auto ch = j.at("channels").get<std::vector<int>>();
  if (ch.size() != 3) throw std::invalid_argument("learner config: channels must have 3 entries");
  cfg.shape.c1 = ch[0];
  cfg.shape.c2 = ch[1];
  cfg.shape.bottleneck = ch[2];
  cfg.shape.activation =
      j.value("activation", std::string("relu")) == "identity" ? Activation::identity : Activation::relu;
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.beta1 = j.at("beta1").get<double>();
  cfg.beta2 = j.at("beta2").get<double>();
  cfg.adam_epsilon = j.at("adam_epsilon").get<double>();
  return cfg;
}

}  // namespace alseg
