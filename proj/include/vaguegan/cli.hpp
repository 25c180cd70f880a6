#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vaguegan/config.hpp"

// Subcommand implementations behind the `vaguegan` executable. Each returns a
// process exit status and prints a one-line reason to `err` on failure.
namespace vaguegan::cli {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  fs::path out = "runs/latest";
  fs::path config;
  train::Profile profile = train::Profile::kDesk;
};

struct GridSpec {
  std::vector<double> poison_rates{0.05, 0.1, 0.2, 0.3};
  std::vector<double> eps_values{0.01, 0.04, 0.08};
  std::vector<std::uint64_t> seeds{0, 1, 2};

  void validate() const;
  std::size_t run_count() const {
    return poison_rates.size() * eps_values.size() * seeds.size();
  }
};

GridSpec load_grid_spec(const fs::path& path);

// Summary row shared by eval and grid outputs.
struct SummaryRow {
  std::string run_id;
  std::string mode;
  double alpha = 0.0;
  double eps = 0.0;
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;
  double loss_d = 0.0, loss_g = 0.0, loss_p = 0.0;
  std::optional<double> delta_i, precision, recall, f1, stealth_mse;
};

inline constexpr const char* kSummaryHeader =
    "run_id,mode,alpha,eps,seed,epoch,loss_d,loss_g,loss_p,delta_i,precision,recall,f1,"
    "stealth_mse";
std::string to_csv(const SummaryRow& row);

// Loads profile defaults, overlays the config file (if any) and the --seed flag.
train::TrainingConfig resolve_config(const GlobalOptions& g, std::ostream& err);

int cmd_preprocess(const fs::path& input, const fs::path& out_dir, int side, std::ostream& out,
                   std::ostream& err);

int cmd_train(const GlobalOptions& g, std::ostream& out, std::ostream& err);

enum class EvalWhich { kSpectral, kBackdoor, kFrequency, kAll };
EvalWhich eval_which_from_string(const std::string& s);

struct EvalOptions {
  EvalWhich which = EvalWhich::kAll;
  int backdoor_samples = 32;
  std::uint64_t seed = 0;
  double percentile = 90.0;
};

int cmd_eval(const fs::path& checkpoint, const EvalOptions& opts, const fs::path& out_dir,
             std::ostream& out, std::ostream& err);

int cmd_grid(const fs::path& gridspec, const GlobalOptions& g, std::ostream& out,
             std::ostream& err);

int cmd_export(const fs::path& checkpoint, const std::string& prompt,
               const std::string& negative_prompt, const fs::path& out_dir, std::uint64_t seed,
               std::ostream& out, std::ostream& err);

// Full argument parsing and dispatch for the executable.
int run(int argc, char** argv);

}  // namespace vaguegan::cli
