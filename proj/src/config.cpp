#include "vaguegan/config.hpp"

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <cstdio>

#include "vaguegan/errors.hpp"

namespace vaguegan::train {

using nlohmann::json;

void TrainingConfig::validate() const {
  auto fail = [](const char* field, const std::string& what) {
    throw InvalidConfigError(field, what);
  };
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr", "must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("adam_beta1", "must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("adam_beta2", "must lie in [0, 1)");
  if (!(adam_eps > 0.0)) fail("adam_eps", "must be positive");
  if (lr_halving_period < 1) fail("lr_halving_period", "must be >= 1");
  if (!(poison_rate >= 0.0 && poison_rate <= 1.0)) fail("poison_rate", "must lie in [0, 1]");
  if (!(eps >= 0.0) || !std::isfinite(eps)) fail("eps", "must be non-negative");
  for (auto [name, v] : {std::pair{"lambda_stealth", lambda_stealth},
                         std::pair{"lambda_tv", lambda_tv}, std::pair{"lambda_hf", lambda_hf}}) {
    if (!std::isfinite(v)) fail(name, "must be finite");
  }
  if (poison_adv_sign != 1 && poison_adv_sign != -1) fail("poison_adv_sign", "must be +1 or -1");
  if (image_side <= 0 || image_side % 8 != 0) {
    fail("image_side", "must be a positive multiple of 8");
  }
  if (trigger.patch_side < 0 || trigger.patch_side > image_side) {
    fail("trigger.patch_side", "must lie in [0, image_side]");
  }
  if (!(trigger.value >= -1.0 && trigger.value <= 1.0)) fail("trigger.value", "must lie in [-1, 1]");
  if (checkpoint_every < 0) fail("checkpoint_every", "must be >= 0");
  if (sample_log_every < 0) fail("sample_log_every", "must be >= 0");
}

TrainingConfig default_config(Mode mode, Profile profile) {
  TrainingConfig cfg;
  cfg.mode = mode;
  if (mode == Mode::kBaseline) cfg.poison_rate = 0.0;
  if (profile == Profile::kDesk) {
    cfg.image_side = 64;
    cfg.epochs = 300;
  } else {
    cfg.image_side = 128;
    cfg.epochs = mode == Mode::kBaseline ? 10000 : 1500;
    cfg.sample_log_every = 5;
  }
  return cfg;
}

Mode mode_from_string(const std::string& s) {
  if (s == "baseline") return Mode::kBaseline;
  if (s == "poisoned") return Mode::kPoisoned;
  throw InvalidConfigError("mode", "expected 'baseline' or 'poisoned', got '" + s + "'");
}

std::string to_string(Mode mode) { return mode == Mode::kBaseline ? "baseline" : "poisoned"; }

Profile profile_from_string(const std::string& s) {
  if (s == "desk") return Profile::kDesk;
  if (s == "paper") return Profile::kPaper;
  throw InvalidConfigError("profile", "expected 'desk' or 'paper', got '" + s + "'");
}

json to_json(const TrainingConfig& cfg) {
  return json{
      {"mode", to_string(cfg.mode)},
      {"epochs", cfg.epochs},
      {"lr", cfg.lr},
      {"adam_beta1", cfg.adam_beta1},
      {"adam_beta2", cfg.adam_beta2},
      {"adam_eps", cfg.adam_eps},
      {"lr_halving_period", cfg.lr_halving_period},
      {"poison_rate", cfg.poison_rate},
      {"eps", cfg.eps},
      {"lambda_stealth", cfg.lambda_stealth},
      {"lambda_tv", cfg.lambda_tv},
      {"lambda_hf", cfg.lambda_hf},
      {"poison_adv_sign", cfg.poison_adv_sign},
      {"poisoner_schedule",
       cfg.poisoner_schedule == PoisonerSchedule::kEveryEpoch ? "every_epoch" : "probabilistic"},
      {"image_side", cfg.image_side},
      {"seed", cfg.seed},
      {"trigger", {{"patch_side", cfg.trigger.patch_side}, {"value", cfg.trigger.value}}},
      {"checkpoint_every", cfg.checkpoint_every},
      {"sample_log_every", cfg.sample_log_every},
      {"images", cfg.images},
  };
}

namespace {

template <typename T>
T read_field(const json& j, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
        throw InvalidConfigError(key, "expected a non-negative integer");
      }
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) throw InvalidConfigError(key, "expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw InvalidConfigError(key, "expected a number");
    }
    return j.get<T>();
  } catch (const json::exception& e) {
    throw InvalidConfigError(key, e.what());
  }
}

}  // namespace

TrainingConfig config_from_json(const json& j, TrainingConfig cfg) {
  if (!j.is_object()) throw InvalidConfigError("config", "expected a JSON object");
  bool mode_given = false, rate_given = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "mode") {
      cfg.mode = mode_from_string(read_field<std::string>(value, key));
      mode_given = true;
    } else if (key == "epochs") {
      cfg.epochs = read_field<int>(value, key);
    } else if (key == "lr") {
      cfg.lr = read_field<double>(value, key);
    } else if (key == "adam_beta1") {
      cfg.adam_beta1 = read_field<double>(value, key);
    } else if (key == "adam_beta2") {
      cfg.adam_beta2 = read_field<double>(value, key);
    } else if (key == "adam_eps") {
      cfg.adam_eps = read_field<double>(value, key);
    } else if (key == "lr_halving_period") {
      cfg.lr_halving_period = read_field<int>(value, key);
    } else if (key == "poison_rate") {
      cfg.poison_rate = read_field<double>(value, key);
      rate_given = true;
    } else if (key == "eps") {
      cfg.eps = read_field<double>(value, key);
    } else if (key == "lambda_stealth") {
      cfg.lambda_stealth = read_field<double>(value, key);
    } else if (key == "lambda_tv") {
      cfg.lambda_tv = read_field<double>(value, key);
    } else if (key == "lambda_hf") {
      cfg.lambda_hf = read_field<double>(value, key);
    } else if (key == "poison_adv_sign") {
      cfg.poison_adv_sign = read_field<int>(value, key);
    } else if (key == "poisoner_schedule") {
      const auto s = read_field<std::string>(value, key);
      if (s == "probabilistic") {
        cfg.poisoner_schedule = PoisonerSchedule::kProbabilistic;
      } else if (s == "every_epoch") {
        cfg.poisoner_schedule = PoisonerSchedule::kEveryEpoch;
      } else {
        throw InvalidConfigError(key, "expected 'probabilistic' or 'every_epoch'");
      }
    } else if (key == "image_side") {
      cfg.image_side = read_field<int>(value, key);
    } else if (key == "seed") {
      cfg.seed = read_field<std::uint64_t>(value, key);
    } else if (key == "trigger") {
      if (!value.is_object()) throw InvalidConfigError(key, "expected an object");
      for (const auto& [tkey, tval] : value.items()) {
        if (tkey == "patch_side") {
          cfg.trigger.patch_side = read_field<int>(tval, "trigger.patch_side");
        } else if (tkey == "value") {
          cfg.trigger.value = read_field<double>(tval, "trigger.value");
        } else {
          throw InvalidConfigError("trigger." + tkey, "unknown key");
        }
      }
    } else if (key == "checkpoint_every") {
      cfg.checkpoint_every = read_field<int>(value, key);
    } else if (key == "sample_log_every") {
      cfg.sample_log_every = read_field<int>(value, key);
    } else if (key == "images") {
      cfg.images = read_field<std::vector<std::string>>(value, key);
    } else {
      throw InvalidConfigError(key, "unknown key");
    }
  }
  // A config that switches to baseline without naming a rate gets alpha = 0.
  if (mode_given && !rate_given && cfg.mode == Mode::kBaseline) cfg.poison_rate = 0.0;
  return cfg;
}

std::string canonical_config_text(const TrainingConfig& cfg) {
  // nlohmann::json objects are key-sorted, so dump() is canonical.
  return to_json(cfg).dump();
}

std::string git_blob_sha1(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest.data(), &len, EVP_sha1(), nullptr) != 1) {
    throw Error("sha1 digest failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    char buf[3];
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string config_hash(const TrainingConfig& cfg) {
  return git_blob_sha1(canonical_config_text(cfg));
}

}  // namespace vaguegan::train
