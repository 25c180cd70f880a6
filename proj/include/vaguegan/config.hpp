#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "vaguegan/poisoning.hpp"

namespace vaguegan::train {

enum class Mode { kBaseline, kPoisoned };

// Desk: 64 px, 300 epochs. Paper: 128 px, 1500 poisoned / 10000 baseline epochs.
enum class Profile { kDesk, kPaper };

enum class PoisonerSchedule { kProbabilistic, kEveryEpoch };

struct TrainingConfig {
  Mode mode = Mode::kPoisoned;
  int epochs = 1500;
  double lr = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int lr_halving_period = 3000;
  double poison_rate = 0.3;
  double eps = 0.08;
  double lambda_stealth = 1.0;
  double lambda_tv = 1e-3;
  double lambda_hf = 1e-2;
  int poison_adv_sign = 1;
  PoisonerSchedule poisoner_schedule = PoisonerSchedule::kProbabilistic;
  int image_side = 128;
  std::uint64_t seed = 0;
  poison::TriggerConfig trigger;
  int checkpoint_every = 0;   // 0: final checkpoint only
  int sample_log_every = 1;   // 0: no sample log
  // Image files, or "synthetic:<seed>" for a procedural scene.
  std::vector<std::string> images;

  // Throws InvalidConfigError naming the first offending field.
  void validate() const;
};

TrainingConfig default_config(Mode mode, Profile profile);

Mode mode_from_string(const std::string& s);
std::string to_string(Mode mode);
Profile profile_from_string(const std::string& s);

nlohmann::json to_json(const TrainingConfig& cfg);

// Overlays the keys present in `j` onto `base`. Unknown keys and values of the
// wrong type raise InvalidConfigError naming the key.
TrainingConfig config_from_json(const nlohmann::json& j, TrainingConfig base);

// Canonical text and git-style content hash (sha1 of "blob <n>\0<text>").
std::string canonical_config_text(const TrainingConfig& cfg);
std::string config_hash(const TrainingConfig& cfg);
std::string git_blob_sha1(const std::string& content);

}  // namespace vaguegan::train
