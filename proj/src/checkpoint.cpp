#include "vaguegan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vaguegan/errors.hpp"

namespace vaguegan::ckpt {

namespace fs = std::filesystem;
using nn::ParamSet;

static_assert(std::endian::native == std::endian::little,
              "checkpoint layout assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'V', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};
constexpr char kTrailer[4] = {'E', 'N', 'D', '.'};

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  template <typename T>
  void pod(T v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(const std::vector<double>& v) {
    os_.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  Reader(std::istream& is, std::string origin) : is_(is), origin_(std::move(origin)) {}

  template <typename T>
  T pod() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ULL << 32)) fail("implausible string length");
    std::string s(n, '\0');
    is_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  void doubles(std::vector<double>& v) {
    is_.read(reinterpret_cast<char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
    check();
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw CheckpointError(origin_ + ": " + what);
  }

 private:
  void check() const {
    if (!is_) fail("truncated checkpoint");
  }
  std::istream& is_;
  std::string origin_;
};

void write_params(Writer& w, const ParamSet& p) {
  w.pod<std::uint8_t>(static_cast<std::uint8_t>(p.id()));
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(p.image_side()));
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(p.params().size()));
  for (const auto& t : p.params()) {
    w.str(t.name);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.pod<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.doubles(t.values);
  }
}

ParamSet read_params(Reader& r, nn::NetworkId expected) {
  const auto id = r.pod<std::uint8_t>();
  if (id != static_cast<std::uint8_t>(expected)) r.fail("network blocks out of order");
  const auto side = static_cast<int>(r.pod<std::uint32_t>());
  ParamSet reference;
  try {
    reference = nn::zero_params(expected, side);
  } catch (const Error& e) {
    r.fail(std::string("bad network block: ") + e.what());
  }
  const auto count = r.pod<std::uint32_t>();
  if (count != reference.params().size()) r.fail("wrong tensor count");
  for (auto& t : reference.params()) {
    if (r.str() != t.name) r.fail("unexpected tensor name, expected " + t.name);
    const auto rank = r.pod<std::uint32_t>();
    if (rank != t.shape.size()) r.fail("wrong rank for " + t.name);
    for (int d : t.shape) {
      if (r.pod<std::uint32_t>() != static_cast<std::uint32_t>(d)) r.fail("wrong shape for " + t.name);
    }
    r.doubles(t.values);
  }
  if (!reference.all_finite()) r.fail("non-finite parameter values");
  return reference;
}

void write_adam(Writer& w, const train::Adam& a) {
  w.pod<std::int64_t>(a.steps());
  for (const auto& t : a.first_moment().params()) w.doubles(t.values);
  for (const auto& t : a.second_moment().params()) w.doubles(t.values);
}

train::Adam read_adam(Reader& r, const ParamSet& like, const train::TrainingConfig& cfg) {
  train::Adam adam(like, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  const auto t = r.pod<std::int64_t>();
  ParamSet m = like.zeros_like(), v = like.zeros_like();
  for (auto& p : m.params()) r.doubles(p.values);
  for (auto& p : v.params()) r.doubles(p.values);
  adam.restore(std::move(m), std::move(v), t);
  return adam;
}

}  // namespace

void save_checkpoint(const fs::path& path, const train::TrainingConfig& cfg,
                     const train::TrainState& s) {
  std::ostringstream buf(std::ios::binary);
  Writer w(buf);
  buf.write(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kFormatVersion);
  w.str(train::canonical_config_text(cfg));
  w.str(train::config_hash(cfg));
  w.pod<std::int64_t>(s.epoch);
  w.str(s.rng.state());
  for (const ParamSet* p : {&s.generator, &s.discriminator, &s.poisoner}) write_params(w, *p);
  for (const train::Adam* a : {&s.adam_g, &s.adam_d, &s.adam_p}) write_adam(w, *a);
  w.pod<std::uint64_t>(s.history.size());
  for (const auto& rec : s.history) {
    w.pod<std::int64_t>(rec.epoch);
    w.pod<double>(rec.loss_d);
    w.pod<double>(rec.loss_g);
    w.pod<double>(rec.loss_p);
    w.pod<std::uint8_t>(rec.poisoned_this_epoch ? 1 : 0);
    w.pod<double>(rec.lr_current);
  }
  buf.write(kTrailer, sizeof(kTrailer));

  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    const std::string bytes = buf.str();
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("cannot write checkpoint " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingFileError("no such checkpoint: " + path.string());
  Reader r(is, path.string());

  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) r.fail("not a checkpoint file");
  const auto version = r.pod<std::uint32_t>();
  if (version != kFormatVersion) r.fail("unsupported format version " + std::to_string(version));

  Checkpoint ck;
  const std::string config_text = r.str();
  try {
    ck.config = train::config_from_json(nlohmann::json::parse(config_text), train::TrainingConfig{});
  } catch (const std::exception& e) {
    r.fail(std::string("bad embedded config: ") + e.what());
  }
  ck.config_hash = r.str();
  if (ck.config_hash != train::git_blob_sha1(config_text)) r.fail("config hash mismatch");

  auto& s = ck.state;
  s.epoch = r.pod<std::int64_t>();
  try {
    s.rng.restore(r.str());
  } catch (const Error& e) {
    r.fail(e.what());
  }
  s.generator = read_params(r, nn::NetworkId::kGenerator);
  s.discriminator = read_params(r, nn::NetworkId::kDiscriminator);
  s.poisoner = read_params(r, nn::NetworkId::kPoisoner);
  s.adam_g = read_adam(r, s.generator, ck.config);
  s.adam_d = read_adam(r, s.discriminator, ck.config);
  s.adam_p = read_adam(r, s.poisoner, ck.config);
  const auto n = r.pod<std::uint64_t>();
  if (n > 100'000'000ULL) r.fail("implausible history length");
  s.history.resize(n);
  for (auto& rec : s.history) {
    rec.epoch = r.pod<std::int64_t>();
    rec.loss_d = r.pod<double>();
    rec.loss_g = r.pod<double>();
    rec.loss_p = r.pod<double>();
    rec.poisoned_this_epoch = r.pod<std::uint8_t>() != 0;
    rec.lr_current = r.pod<double>();
  }
  char trailer[sizeof(kTrailer)];
  is.read(trailer, sizeof(trailer));
  if (!is || std::memcmp(trailer, kTrailer, sizeof(kTrailer)) != 0) r.fail("missing trailer");
  return ck;
}

}  // namespace vaguegan::ckpt
