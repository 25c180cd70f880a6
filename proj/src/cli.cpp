#include "vaguegan/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vaguegan/checkpoint.hpp"
#include "vaguegan/errors.hpp"
#include "vaguegan/evaluation.hpp"
#include "vaguegan/image.hpp"
#include "vaguegan/npy.hpp"
#include "vaguegan/training.hpp"

namespace vaguegan::cli {

using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json read_json_file(const fs::path& path, const char* what) {
  std::ifstream is(path);
  if (!is) throw MissingFileError(std::string("cannot read ") + what + " " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw InvalidConfigError(what, std::string("not valid JSON: ") + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream os(path);
  os << j.dump(2) << '\n';
  if (!os) throw IoError("cannot write " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create directory " + dir.string() +
                  (ec ? ": " + ec.message() : std::string()));
  }
}

// Runs `body`, mapping library exceptions onto a one-line reason and exit 1.
template <typename F>
int guarded(const char* command, std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const InvalidConfigError& e) {
    err << command << ": invalid config field " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << command << ": " << e.what() << '\n';
  }
  return 1;
}

std::string run_id_for(const train::TrainingConfig& cfg) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s_a%g_e%g_s%llu_%s", train::to_string(cfg.mode).c_str(),
                cfg.poison_rate, cfg.eps, static_cast<unsigned long long>(cfg.seed),
                train::config_hash(cfg).substr(0, 8).c_str());
  return buf;
}

fs::path run_dir_of(const fs::path& checkpoint) {
  fs::path dir = checkpoint.parent_path();
  if (dir.filename() == "checkpoints") dir = dir.parent_path();
  return dir;
}

std::vector<ImageTensor> dataset_for(const ckpt::Checkpoint& ck, const fs::path& run_dir) {
  const fs::path file = run_dir / "dataset.npy";
  if (fs::exists(file)) {
    const auto arr = io::read_npy(file);
    if (arr.shape.size() != 4 || arr.shape[1] != 3) throw DecodeError("dataset.npy: bad shape");
    std::vector<ImageTensor> out;
    const auto h = static_cast<int>(arr.shape[2]), w = static_cast<int>(arr.shape[3]);
    const std::size_t per = 3 * arr.shape[2] * arr.shape[3];
    for (std::size_t n = 0; n < arr.shape[0]; ++n) {
      ImageTensor t(3, h, w);
      std::copy_n(arr.values.begin() + static_cast<std::ptrdiff_t>(n * per), per, t.data());
      out.push_back(std::move(t));
    }
    return out;
  }
  return train::load_dataset(ck.config, run_dir);
}

struct LoggedSample {
  std::int64_t epoch = 0;
  int index = 0;
  bool poisoned = false;
  ImageTensor image;
};

std::vector<LoggedSample> read_sample_log(const fs::path& run_dir) {
  const fs::path npy = run_dir / "samples.npy", csv = run_dir / "samples.csv";
  if (!fs::exists(npy) || !fs::exists(csv)) {
    throw MissingFileError("no sample log (samples.npy/samples.csv) in " + run_dir.string());
  }
  const auto arr = io::read_npy(npy);
  std::ifstream is(csv);
  std::string line;
  std::getline(is, line);  // header
  std::vector<LoggedSample> out;
  const std::size_t rows = arr.shape.empty() ? 0 : arr.shape[0];
  if (rows == 0) return out;
  const auto h = static_cast<int>(arr.shape[2]), w = static_cast<int>(arr.shape[3]);
  const std::size_t per = 3 * arr.shape[2] * arr.shape[3];
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    long long row = 0, epoch = 0;
    int index = 0, poisoned = 0;
    if (std::sscanf(line.c_str(), "%lld,%lld,%d,%d", &row, &epoch, &index, &poisoned) != 4 ||
        row < 0 || static_cast<std::size_t>(row) >= rows) {
      throw DecodeError("samples.csv: malformed line '" + line + "'");
    }
    LoggedSample s{epoch, index, poisoned != 0, ImageTensor(3, h, w)};
    std::copy_n(arr.values.begin() + static_cast<std::ptrdiff_t>(row * per), per, s.image.data());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

void GridSpec::validate() const {
  if (poison_rates.empty()) throw InvalidConfigError("poison_rates", "must not be empty");
  if (eps_values.empty()) throw InvalidConfigError("eps_values", "must not be empty");
  if (seeds.empty()) throw InvalidConfigError("seeds", "must not be empty");
  for (double r : poison_rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw InvalidConfigError("poison_rates", "rates must lie in [0, 1]");
  }
  for (double e : eps_values) {
    if (!(e >= 0.0)) throw InvalidConfigError("eps_values", "values must be >= 0");
  }
}

GridSpec load_grid_spec(const fs::path& path) {
  const json j = read_json_file(path, "grid spec");
  if (!j.is_object()) throw InvalidConfigError("grid", "expected a JSON object");
  GridSpec spec;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "poison_rates") {
        spec.poison_rates = value.get<std::vector<double>>();
      } else if (key == "eps_values") {
        spec.eps_values = value.get<std::vector<double>>();
      } else if (key == "seeds") {
        spec.seeds = value.get<std::vector<std::uint64_t>>();
      } else {
        throw InvalidConfigError(key, "unknown key");
      }
    } catch (const json::exception& e) {
      throw InvalidConfigError(key, e.what());
    }
  }
  spec.validate();
  return spec;
}

std::string to_csv(const SummaryRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); };
  std::ostringstream os;
  os << r.run_id << ',' << r.mode << ',' << fmt_double(r.alpha) << ',' << fmt_double(r.eps) << ','
     << r.seed << ',' << r.epoch << ',' << fmt_double(r.loss_d) << ',' << fmt_double(r.loss_g)
     << ',' << fmt_double(r.loss_p) << ',' << opt(r.delta_i) << ',' << opt(r.precision) << ','
     << opt(r.recall) << ',' << opt(r.f1) << ',' << opt(r.stealth_mse);
  return os.str();
}

train::TrainingConfig resolve_config(const GlobalOptions& g, std::ostream&) {
  json file = json::object();
  if (!g.config.empty()) file = read_json_file(g.config, "config");
  train::Mode mode = train::Mode::kPoisoned;
  if (file.is_object() && file.contains("mode") && file["mode"].is_string()) {
    mode = train::mode_from_string(file["mode"].get<std::string>());
  }
  train::TrainingConfig cfg =
      train::config_from_json(file, train::default_config(mode, g.profile));
  if (g.seed) cfg.seed = *g.seed;
  if (cfg.images.empty()) cfg.images.push_back("synthetic:" + std::to_string(cfg.seed));
  cfg.validate();
  return cfg;
}

// -------------------------------------------------------------- preprocess

int cmd_preprocess(const fs::path& input, const fs::path& out_dir, int side, std::ostream& out,
                   std::ostream& err) {
  return guarded("preprocess", err, [&] {
    const image::ImageU8 img = image::load_image(input);
    const ImageTensor gan = image::to_gan_input(img, side);
    ensure_dir(out_dir);
    io::write_npy(out_dir / "gan_input.npy",
                  {3, static_cast<std::size_t>(side), static_cast<std::size_t>(side)},
                  gan.values());

    Tensor raw(3, img.height, img.width);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) raw[i] = img.pixels[i];
    const Tensor big = image::resize_bilinear(raw, image::kDiffusionSide, image::kDiffusionSide);
    image::ImageU8 resized(image::kDiffusionSide, image::kDiffusionSide);
    for (std::size_t i = 0; i < big.size(); ++i) {
      resized.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::floor(big[i] + 0.5), 0.0, 255.0));
    }
    image::save_png(resized, out_dir / "resized_512.png");
    image::save_png(image::edge_to_rgb(image::canny_edge_map(resized)), out_dir / "canny_512.png");
    image::save_png(image::edge_to_rgb(image::laplacian_edge_map(resized)),
                    out_dir / "laplacian_512.png");
    out << "preprocess: wrote 4 artifacts to " << out_dir.string() << '\n';
    return 0;
  });
}

// ------------------------------------------------------------------- train

namespace {

struct TrainOutcome {
  train::TrainingConfig cfg;
  train::TrainResult result;
  std::string run_id;
};

TrainOutcome run_training(const train::TrainingConfig& cfg, const fs::path& base_dir,
                          const fs::path& out_dir, std::ostream& out) {
  ensure_dir(out_dir);
  const std::string started = utc_now();
  const auto dataset = train::load_dataset(cfg, base_dir);
  train::TrainOptions options;
  options.run_dir = out_dir;
  const std::int64_t report_every = std::max<std::int64_t>(1, cfg.epochs / 10);
  options.on_epoch = [&](const train::EpochRecord& r) {
    if (r.epoch % report_every == 0 || r.epoch == cfg.epochs) {
      char line[160];
      std::snprintf(line, sizeof(line), "epoch %lld/%d  loss_d %.4f  loss_g %.4f  loss_p %.4f\n",
                    static_cast<long long>(r.epoch), cfg.epochs, r.loss_d, r.loss_g, r.loss_p);
      out << line << std::flush;
    }
  };
  TrainOutcome outcome{cfg, train::train(cfg, dataset, options), run_id_for(cfg)};

  std::vector<std::string> checkpoints;
  for (const auto& entry : fs::directory_iterator(out_dir / "checkpoints")) {
    checkpoints.push_back(fs::relative(entry.path(), out_dir).string());
  }
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.push_back("final.ckpt");
  json manifest = {
      {"run_id", outcome.run_id},
      {"config", train::to_json(cfg)},
      {"config_hash", train::config_hash(cfg)},
      {"started", started},
      {"finished", utc_now()},
      {"checkpoints", checkpoints},
      {"reports",
       {"config.json", "metrics.csv", "dataset.npy", "samples.npy", "samples.csv"}},
  };
  write_json_file(out_dir / "run_manifest.json", manifest);
  return outcome;
}

}  // namespace

int cmd_train(const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  return guarded("train", err, [&] {
    const auto cfg = resolve_config(g, err);
    const fs::path base = g.config.empty() ? fs::path() : g.config.parent_path();
    const auto outcome = run_training(cfg, base, g.out, out);
    out << "train: " << outcome.run_id << " finished; checkpoint "
        << outcome.result.final_checkpoint.string() << '\n';
    return 0;
  });
}

// -------------------------------------------------------------------- eval

EvalWhich eval_which_from_string(const std::string& s) {
  if (s == "spectral") return EvalWhich::kSpectral;
  if (s == "backdoor") return EvalWhich::kBackdoor;
  if (s == "frequency") return EvalWhich::kFrequency;
  if (s == "all") return EvalWhich::kAll;
  throw InvalidConfigError("which", "expected spectral|backdoor|frequency|all");
}

namespace {

SummaryRow evaluate_checkpoint(const fs::path& checkpoint, const EvalOptions& opts,
                               const fs::path& out_dir) {
  const ckpt::Checkpoint ck = ckpt::load_checkpoint(checkpoint);
  const fs::path run_dir = run_dir_of(checkpoint);
  const auto dataset = dataset_for(ck, run_dir);
  if (dataset.empty()) throw DecodeError("run has an empty dataset");
  ensure_dir(out_dir);
  const auto& cfg = ck.config;
  const auto& st = ck.state;

  SummaryRow row;
  row.run_id = run_id_for(cfg);
  row.mode = train::to_string(cfg.mode);
  row.alpha = cfg.mode == train::Mode::kBaseline ? 0.0 : cfg.poison_rate;
  row.eps = cfg.eps;
  row.seed = cfg.seed;
  row.epoch = st.epoch;
  if (!st.history.empty()) {
    row.loss_d = st.history.back().loss_d;
    row.loss_g = st.history.back().loss_g;
    row.loss_p = st.history.back().loss_p;
  }
  const bool all = opts.which == EvalWhich::kAll;

  if (all || opts.which == EvalWhich::kSpectral) {
    const auto logged = read_sample_log(run_dir);
    std::vector<eval::LabeledSample> samples;
    double mse_sum = 0.0;
    int n_poisoned = 0;
    for (const auto& s : logged) {
      if (s.poisoned && s.index >= 0 && static_cast<std::size_t>(s.index) < dataset.size()) {
        mse_sum += poison::stealth_mse(s.image, dataset[s.index]);
        ++n_poisoned;
      }
      samples.push_back({s.image, s.poisoned});
    }
    const auto fm = eval::collect_features(st.discriminator, samples);
    const auto report = eval::spectral_signature(fm, opts.percentile);
    write_json_file(out_dir / "spectral.json", eval::to_json(report));
    row.precision = report.metrics.precision;
    row.recall = report.metrics.recall;
    row.f1 = report.metrics.f1;
    row.stealth_mse = n_poisoned > 0 ? mse_sum / n_poisoned : 0.0;
  }
  if (all || opts.which == EvalWhich::kBackdoor) {
    const auto report = eval::backdoor_proxy(st.generator, dataset.front(), cfg.trigger,
                                             opts.backdoor_samples, opts.seed);
    write_json_file(out_dir / "backdoor.json", eval::to_json(report));
    row.delta_i = report.delta_i;
  }
  if (all || opts.which == EvalWhich::kFrequency) {
    RandomStream rng(mix_seed(opts.seed, 0xf4e9));
    const auto z_p = rng.normal_vector(nn::kPoisonLatentDim);
    const ImageTensor& x0 = dataset.front();
    const auto delta = nn::poisoner_forward(st.poisoner, x0, z_p, cfg.eps);
    const auto xp = poison::apply_perturbation(x0, delta);
    write_json_file(out_dir / "frequency.json",
                    eval::to_json(eval::frequency_report(x0, xp)));
  }
  std::ofstream csv(out_dir / "summary.csv");
  csv << kSummaryHeader << '\n' << to_csv(row) << '\n';
  if (!csv) throw IoError("cannot write summary.csv");
  return row;
}

}  // namespace

int cmd_eval(const fs::path& checkpoint, const EvalOptions& opts, const fs::path& out_dir,
             std::ostream& out, std::ostream& err) {
  return guarded("eval", err, [&] {
    const SummaryRow row = evaluate_checkpoint(checkpoint, opts, out_dir);
    out << kSummaryHeader << '\n' << to_csv(row) << '\n';
    return 0;
  });
}

// -------------------------------------------------------------------- grid

int cmd_grid(const fs::path& gridspec, const GlobalOptions& g, std::ostream& out,
             std::ostream& err) {
  return guarded("grid", err, [&] {
    const GridSpec spec = load_grid_spec(gridspec);
    const auto base = resolve_config(g, err);
    const fs::path base_dir = g.config.empty() ? fs::path() : g.config.parent_path();
    ensure_dir(g.out);

    std::ofstream runs_csv(g.out / "grid_runs.csv");
    runs_csv << kSummaryHeader << ",status\n";
    std::map<std::pair<double, double>, std::vector<SummaryRow>> cells;
    int failures = 0;
    std::size_t done = 0;
    for (double rate : spec.poison_rates) {
      for (double eps : spec.eps_values) {
        for (std::uint64_t seed : spec.seeds) {
          auto cfg = base;
          cfg.mode = train::Mode::kPoisoned;
          cfg.poison_rate = rate;
          cfg.eps = eps;
          cfg.seed = seed;
          char name[96];
          std::snprintf(name, sizeof(name), "a%g_e%g_s%llu", rate, eps,
                        static_cast<unsigned long long>(seed));
          const fs::path run_dir = g.out / "runs" / name;
          ++done;
          out << "grid: run " << done << "/" << spec.run_count() << " (" << name << ")\n";
          try {
            const auto outcome = run_training(cfg, base_dir, run_dir, out);
            EvalOptions eo;
            eo.seed = seed;
            const SummaryRow row =
                evaluate_checkpoint(outcome.result.final_checkpoint, eo, run_dir / "eval");
            runs_csv << to_csv(row) << ",ok\n" << std::flush;
            cells[{rate, eps}].push_back(row);
          } catch (const std::exception& e) {
            ++failures;
            err << "grid: run " << name << " failed: " << e.what() << '\n';
            SummaryRow row;
            row.run_id = name;
            row.mode = "poisoned";
            row.alpha = rate;
            row.eps = eps;
            row.seed = seed;
            runs_csv << to_csv(row) << ",failed\n" << std::flush;
          }
        }
      }
    }

    std::ofstream table(g.out / "grid_results.csv");
    table << "alpha,eps,n_seeds,delta_i,precision,recall,f1,stealth_mse,loss_d,loss_g,loss_p\n";
    for (double rate : spec.poison_rates) {
      for (double eps : spec.eps_values) {
        const auto it = cells.find({rate, eps});
        if (it == cells.end() || it->second.empty()) continue;
        const auto& rows = it->second;
        auto mean = [&](auto get) {
          double s = 0.0;
          for (const auto& r : rows) s += get(r);
          return s / static_cast<double>(rows.size());
        };
        table << fmt_double(rate) << ',' << fmt_double(eps) << ',' << rows.size() << ','
              << fmt_double(mean([](const SummaryRow& r) { return r.delta_i.value_or(0.0); })) << ','
              << fmt_double(mean([](const SummaryRow& r) { return r.precision.value_or(0.0); })) << ','
              << fmt_double(mean([](const SummaryRow& r) { return r.recall.value_or(0.0); })) << ','
              << fmt_double(mean([](const SummaryRow& r) { return r.f1.value_or(0.0); })) << ','
              << fmt_double(mean([](const SummaryRow& r) { return r.stealth_mse.value_or(0.0); })) << ','
              << fmt_double(mean([](const SummaryRow& r) { return r.loss_d; })) << ','
              << fmt_double(mean([](const SummaryRow& r) { return r.loss_g; })) << ','
              << fmt_double(mean([](const SummaryRow& r) { return r.loss_p; })) << '\n';
      }
    }
    out << "grid: " << spec.run_count() - failures << "/" << spec.run_count()
        << " runs succeeded; table at " << (g.out / "grid_results.csv").string() << '\n';
    return failures == 0 ? 0 : 1;
  });
}

// ------------------------------------------------------------------ export

int cmd_export(const fs::path& checkpoint, const std::string& prompt,
               const std::string& negative_prompt, const fs::path& out_dir, std::uint64_t seed,
               std::ostream& out, std::ostream& err) {
  return guarded("export", err, [&] {
    const ckpt::Checkpoint ck = ckpt::load_checkpoint(checkpoint);
    const auto dataset = dataset_for(ck, run_dir_of(checkpoint));
    if (dataset.empty()) throw DecodeError("run has an empty dataset");
    RandomStream rng(mix_seed(seed, 0xe8));
    const auto z = rng.normal_vector(nn::kLatentDim);
    const auto f = rng.bernoulli_vector(nn::kFeatureDim, 0.5);
    const Tensor generated = nn::generator_forward(ck.state.generator, dataset.front(), z, f);
    const auto manifest = image::export_diffusion_manifest(generated, prompt, negative_prompt, out_dir);
    out << "export: wrote " << manifest.string() << '\n';
    return 0;
  });
}

// ---------------------------------------------------------------- dispatch

int run(int argc, char** argv) {
  CLI::App app{"Stealthy GAN poisoning toolkit: preprocessing, three-network training, "
               "spectral-signature and backdoor-proxy evaluation."};
  app.require_subcommand(1);

  GlobalOptions g;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "runs/latest", config_path, profile = "desk";
  app.add_option("--seed", seed, "Seed overriding the config seed");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--config", config_path, "Training config (JSON)");
  app.add_option("--profile", profile, "Default profile")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();

  auto* pre = app.add_subcommand("preprocess", "Normalise an image and export edge maps");
  pre->fallthrough();
  std::string pre_input;
  int side = 0;
  pre->add_option("input", pre_input, "Input PNG/JPEG")->required();
  pre->add_option("--side", side, "GAN input side (default: profile side)");

  auto* tr = app.add_subcommand("train", "Train baseline or poisoned networks");
  tr->fallthrough();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->fallthrough();
  std::string ev_ckpt, which = "all";
  int n_samples = 32;
  double percentile = 90.0;
  ev->add_option("checkpoint", ev_ckpt, "Checkpoint file")->required();
  ev->add_option("--which", which, "spectral|backdoor|frequency|all")
      ->check(CLI::IsMember({"spectral", "backdoor", "frequency", "all"}))
      ->capture_default_str();
  ev->add_option("--samples", n_samples, "Backdoor proxy draws")->capture_default_str();
  ev->add_option("--percentile", percentile, "Spectral threshold percentile")->capture_default_str();

  auto* gr = app.add_subcommand("grid", "Sweep poison rate x eps x seed");
  gr->fallthrough();
  std::string grid_path;
  gr->add_option("gridspec", grid_path, "Grid spec (JSON)")->required();

  auto* ex = app.add_subcommand("export", "Export generator output for a diffusion pipeline");
  ex->fallthrough();
  std::string ex_ckpt, prompt, negative;
  ex->add_option("checkpoint", ex_ckpt, "Checkpoint file")->required();
  ex->add_option("--prompt", prompt, "Text prompt")->required();
  ex->add_option("--negative-prompt", negative, "Negative prompt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  g.seed = seed;
  g.out = out_dir;
  g.config = config_path;
  g.profile = train::profile_from_string(profile);

  if (*pre) {
    const int s = side > 0 ? side : (g.profile == train::Profile::kDesk ? 64 : 128);
    return cmd_preprocess(pre_input, g.out, s, std::cout, std::cerr);
  }
  if (*tr) return cmd_train(g, std::cout, std::cerr);
  if (*ev) {
    EvalOptions opts;
    try {
      opts.which = eval_which_from_string(which);
    } catch (const Error& e) {
      std::cerr << "eval: " << e.what() << '\n';
      return 1;
    }
    opts.backdoor_samples = n_samples;
    opts.seed = seed.value_or(0);
    opts.percentile = percentile;
    return cmd_eval(ev_ckpt, opts, g.out, std::cout, std::cerr);
  }
  if (*gr) return cmd_grid(grid_path, g, std::cout, std::cerr);
  if (*ex) return cmd_export(ex_ckpt, prompt, negative, g.out, seed.value_or(0), std::cout, std::cerr);
  return 1;
}

}  // namespace vaguegan::cli
