#include "sgldreg/config.hpp"

#include <charconv>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>

#include "sgldreg/errors.hpp"
#include "sgldreg/formats.hpp"

namespace sgldreg {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return parse_number(v);
  } catch (const FormatError&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
  }
  return out;
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define SGLDREG_DOUBLE(name)                                                                   \
  Field{#name, [](const RunConfig& c) { return format_number(c.name); },                       \
        [](RunConfig& c, const std::string& v) { c.name = to_double(#name, v); }}
#define SGLDREG_U64(name)                                                                      \
  Field{#name, [](const RunConfig& c) { return std::to_string(c.name); },                      \
        [](RunConfig& c, const std::string& v) { c.name = to_u64(#name, v); }}
#define SGLDREG_INT(name)                                                                      \
  Field{#name, [](const RunConfig& c) { return std::to_string(c.name); },                      \
        [](RunConfig& c, const std::string& v) { c.name = to_int(#name, v); }}
#define SGLDREG_STRING(name)                                                                   \
  Field{#name, [](const RunConfig& c) { return c.name; }, [](RunConfig& c, const std::string& v) { c.name = v; }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      SGLDREG_DOUBLE(channel_scale),
      SGLDREG_DOUBLE(leaky_slope),
      SGLDREG_DOUBLE(final_layer_init_scale),
      SGLDREG_STRING(similarity),
      SGLDREG_DOUBLE(lambda),
      SGLDREG_INT(lcc_window),
      SGLDREG_DOUBLE(weight_decay),
      SGLDREG_DOUBLE(eta),
      SGLDREG_DOUBLE(beta1),
      SGLDREG_DOUBLE(beta2),
      SGLDREG_DOUBLE(epsilon),
      SGLDREG_DOUBLE(alpha),
      SGLDREG_U64(iterations),
      SGLDREG_U64(burn_in),
      SGLDREG_U64(thinning),
      SGLDREG_U64(batch_size),
      SGLDREG_U64(val_every),
      SGLDREG_U64(loss_window),
      SGLDREG_U64(data_seed),
      SGLDREG_U64(train_seed),
      SGLDREG_STRING(data),
      SGLDREG_STRING(labels),
      SGLDREG_INT(digit),
      SGLDREG_U64(image_size),
      SGLDREG_U64(train_images),
      SGLDREG_U64(val_images),
      SGLDREG_U64(test_images),
      SGLDREG_U64(train_pairs),
      SGLDREG_U64(val_pairs),
      SGLDREG_U64(test_pairs),
      SGLDREG_U64(synth_count),
      SGLDREG_DOUBLE(synth_max_disp),
      Field{"sigmas",
            [](const RunConfig& c) {
              std::string s;
              for (std::size_t i = 0; i < c.sigmas.size(); ++i) s += (i ? "," : "") + format_number(c.sigmas[i]);
              return s;
            },
            [](RunConfig& c, const std::string& v) { c.sigmas = to_list("sigmas", v); }},
  };
  return table;
}

#undef SGLDREG_DOUBLE
#undef SGLDREG_U64
#undef SGLDREG_INT
#undef SGLDREG_STRING

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const FormatError&) {
    throw ConfigError("cannot read config file '" + path + "'");
  }
  return parse(std::string(bytes.begin(), bytes.end()));
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

UNetConfig RunConfig::unet_config() const {
  UNetConfig u;
  u.channel_scale = channel_scale;
  u.leaky_slope = leaky_slope;
  u.final_layer_init_scale = final_layer_init_scale;
  return u;
}

LossConfig RunConfig::loss_config() const {
  LossConfig l;
  l.similarity = parse_similarity(similarity);
  l.lambda = lambda;
  l.lcc_window = lcc_window;
  l.weight_decay = weight_decay;
  return l;
}

AdamSgldConfig RunConfig::optim_config() const {
  AdamSgldConfig o;
  o.eta = eta;
  o.beta1 = beta1;
  o.beta2 = beta2;
  o.epsilon = epsilon;
  o.alpha = alpha;
  return o;
}

SnapshotSchedule RunConfig::schedule() const { return SnapshotSchedule{iterations, burn_in, thinning}; }

TrainOptions RunConfig::train_options() const {
  TrainOptions t;
  t.unet = unet_config();
  t.loss = loss_config();
  t.optim = optim_config();
  t.schedule = schedule();
  t.batch_size = batch_size;
  t.val_every = val_every;
  t.seed = train_seed;
  return t;
}

PairSplitSpec RunConfig::split_spec() const {
  PairSplitSpec s;
  s.digit = digit;
  s.train_images = train_images;
  s.val_images = val_images;
  s.test_images = test_images;
  s.train_pairs = train_pairs;
  s.val_pairs = val_pairs;
  s.test_pairs = test_pairs;
  s.image_size = image_size;
  return s;
}

void RunConfig::validate() const {
  train_options().validate();
  if (loss_window == 0) throw ConfigError("loss_window must be >= 1");
  if (image_size == 0) throw ConfigError("image_size must be >= 1");
  if (!(synth_max_disp >= 0.0 && synth_max_disp <= 4.0)) throw ConfigError("synth_max_disp must lie in [0,4]");
}

DatasetSplit load_dataset(const RunConfig& config) {
  namespace fs = std::filesystem;
  if (config.data.empty()) throw ConfigError("no data path given (set `data` or pass --data)");
  if (!fs::exists(config.data)) throw ConfigError("data path '" + config.data + "' does not exist");
  DatasetSplit split;
  split.seed = config.data_seed;
  if (fs::is_directory(config.data)) {
    const fs::path dir(config.data);
    for (const char* name : {kTrainPairsFile, kValPairsFile, kTestPairsFile}) {
      if (!fs::exists(dir / name)) throw ConfigError("data directory lacks '" + std::string(name) + "'");
    }
    split.train = load_pairs((dir / kTrainPairsFile).string());
    split.val = load_pairs((dir / kValPairsFile).string());
    split.test = load_pairs((dir / kTestPairsFile).string());
    return split;
  }
  if (config.labels.empty()) throw ConfigError("IDX data needs a label file (set `labels` or pass --labels)");
  if (!fs::exists(config.labels)) throw ConfigError("label path '" + config.labels + "' does not exist");
  const auto images = load_idx_images(config.data);
  const auto labels = load_idx_labels(config.labels);
  return make_pairs(images, labels, config.split_spec(), config.data_seed);
}

DatasetSplit synth_dataset(const RunConfig& config) {
  ShapeSpec spec;
  spec.height = spec.width = config.image_size;
  std::mt19937_64 seeder(config.data_seed);
  const std::uint64_t train_seed = seeder(), val_seed = seeder(), test_seed = seeder();
  DatasetSplit split;
  split.seed = config.data_seed;
  split.train = synth_pairs(config.synth_count, spec, config.synth_max_disp, train_seed);
  split.val = synth_pairs(config.val_pairs, spec, config.synth_max_disp, val_seed);
  split.test = synth_pairs(config.test_pairs, spec, config.synth_max_disp, test_seed);
  return split;
}

}  // namespace sgldreg
