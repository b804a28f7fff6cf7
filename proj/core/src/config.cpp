#include "daf/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "daf/errors.hpp"

namespace daf {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(std::string_view raw, std::string_view key) {
  const std::string text = trim(raw);
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + text + "'");
  }
  return value;
}

bool parse_bool(std::string_view raw, std::string_view key) {
  const std::string text = trim(raw);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected true/false, got '" + text + "'");
}

std::vector<double> parse_list(std::string_view raw, std::string_view key) {
  std::vector<double> out;
  std::string text(raw);
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(item, key));
  if (out.empty()) throw ConfigError("config key '" + std::string(key) + "': empty list");
  return out;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v[i]);
  }
  return out;
}

struct Field {
  std::string_view section;
  std::string_view key;
  std::function<void(Config&, std::string_view, std::string_view)> set;
  std::function<std::string(const Config&)> get;
};

#define DAF_INT_FIELD(sec, member, name)                                                      \
  Field{sec, name,                                                                            \
        [](Config& c, std::string_view v, std::string_view k) { member = parse_number<int64_t>(v, k); }, \
        [](const Config& c) { return std::to_string(member); }}
#define DAF_DOUBLE_FIELD(sec, member, name)                                                  \
  Field{sec, name,                                                                            \
        [](Config& c, std::string_view v, std::string_view k) { member = parse_number<double>(v, k); }, \
        [](const Config& c) { return format_double(member); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      DAF_INT_FIELD("model", c.model.embed_dim, "embed_dim"),
      DAF_INT_FIELD("model", c.model.num_heads, "num_heads"),
      DAF_INT_FIELD("model", c.model.shared_blocks, "shared_blocks"),
      DAF_INT_FIELD("model", c.model.base_blocks, "base_blocks"),
      DAF_INT_FIELD("model", c.model.detail_blocks, "detail_blocks"),
      DAF_INT_FIELD("model", c.model.decoder_blocks, "decoder_blocks"),
      DAF_DOUBLE_FIELD("model", c.model.ffn_expansion, "ffn_expansion"),

      DAF_DOUBLE_FIELD("loss", c.loss.alpha1, "alpha1"),
      DAF_DOUBLE_FIELD("loss", c.loss.alpha2, "alpha2"),
      DAF_DOUBLE_FIELD("loss", c.loss.beta1, "beta1"),
      DAF_DOUBLE_FIELD("loss", c.loss.beta2, "beta2"),
      DAF_DOUBLE_FIELD("loss", c.loss.beta3, "beta3"),
      DAF_DOUBLE_FIELD("loss", c.loss.gamma1, "gamma1"),
      DAF_DOUBLE_FIELD("loss", c.loss.gamma2, "gamma2"),
      DAF_DOUBLE_FIELD("loss", c.loss.temperature, "temperature"),
      DAF_DOUBLE_FIELD("loss", c.loss.ssim_c1, "ssim_c1"),
      DAF_DOUBLE_FIELD("loss", c.loss.ssim_c2, "ssim_c2"),
      Field{"loss", "corr_mode",
            [](Config& c, std::string_view v, std::string_view k) {
              const std::string text = trim(v);
              if (text == "literal") {
                c.loss.corr_mode = CorrMode::kLiteral;
              } else if (text == "decomposed") {
                c.loss.corr_mode = CorrMode::kDecomposed;
              } else {
                throw ConfigError("config key '" + std::string(k) +
                                  "': expected literal|decomposed, got '" + text + "'");
              }
            },
            [](const Config& c) { return std::string(to_string(c.loss.corr_mode)); }},

      DAF_INT_FIELD("kernel", c.kernel.gauss_k, "gauss_k"),
      Field{"kernel", "lap_gammas",
            [](Config& c, std::string_view v, std::string_view k) { c.kernel.lap_gammas = parse_list(v, k); },
            [](const Config& c) { return format_list(c.kernel.lap_gammas); }},
      DAF_DOUBLE_FIELD("kernel", c.kernel.mix_c1, "mix_c1"),
      DAF_INT_FIELD("kernel", c.kernel.n_positions, "n_positions"),

      DAF_INT_FIELD("train", c.train.patch_size, "patch_size"),
      DAF_INT_FIELD("train", c.train.batch_size, "batch_size"),
      DAF_INT_FIELD("train", c.train.epochs, "epochs"),
      DAF_DOUBLE_FIELD("train", c.train.lr0, "lr0"),
      DAF_INT_FIELD("train", c.train.lr_halve_every, "lr_halve_every"),
      DAF_INT_FIELD("train", c.train.stage, "stage"),
      Field{"train", "seed",
            [](Config& c, std::string_view v, std::string_view k) { c.train.seed = parse_number<uint64_t>(v, k); },
            [](const Config& c) { return std::to_string(c.train.seed); }},
      Field{"train", "stage2_freeze_encoders",
            [](Config& c, std::string_view v, std::string_view k) {
              c.train.stage2_freeze_encoders = parse_bool(v, k);
            },
            [](const Config& c) { return std::string(c.train.stage2_freeze_encoders ? "true" : "false"); }},
      DAF_DOUBLE_FIELD("train", c.train.grad_clip, "grad_clip"),
      DAF_INT_FIELD("train", c.train.checkpoint_every, "checkpoint_every"),
      DAF_INT_FIELD("train", c.train.max_iterations, "max_iterations"),
  };
  return table;
}

#undef DAF_INT_FIELD
#undef DAF_DOUBLE_FIELD

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("config key '" + key + "': " + what);
}

}  // namespace

std::string_view to_string(CorrMode mode) {
  return mode == CorrMode::kLiteral ? "literal" : "decomposed";
}

void ModelConfig::validate() const {
  require(embed_dim >= 2, "model.embed_dim", "must be >= 2");
  require(embed_dim % 2 == 0, "model.embed_dim", "must be even (coupling channel split)");
  require(num_heads >= 1, "model.num_heads", "must be >= 1");
  require(embed_dim % num_heads == 0, "model.embed_dim", "must be divisible by model.num_heads");
  require(shared_blocks >= 1, "model.shared_blocks", "must be >= 1");
  require(base_blocks >= 3, "model.base_blocks", "must be >= 3 (three adaptation taps)");
  require(detail_blocks >= 1, "model.detail_blocks", "must be >= 1");
  require(decoder_blocks >= 1, "model.decoder_blocks", "must be >= 1");
  require(ffn_expansion > 0.0, "model.ffn_expansion", "must be positive");
}

void LossWeights::validate() const {
  const std::array<std::pair<const char*, double>, 9> weights{{{"loss.alpha1", alpha1},
                                                               {"loss.alpha2", alpha2},
                                                               {"loss.beta1", beta1},
                                                               {"loss.beta2", beta2},
                                                               {"loss.beta3", beta3},
                                                               {"loss.gamma1", gamma1},
                                                               {"loss.gamma2", gamma2},
                                                               {"loss.ssim_c1", ssim_c1},
                                                               {"loss.ssim_c2", ssim_c2}}};
  for (const auto& [key, value] : weights) require(value >= 0.0, key, "must be nonnegative");
  require(temperature > 0.0, "loss.temperature", "must be positive");
}

void KernelConfig::validate() const {
  require(gauss_k >= 1, "kernel.gauss_k", "must be >= 1");
  require(!lap_gammas.empty(), "kernel.lap_gammas", "must not be empty");
  for (double g : lap_gammas) require(g > 0.0, "kernel.lap_gammas", "every gamma must be positive");
  require(mix_c1 >= 0.0 && mix_c1 <= 1.0, "kernel.mix_c1", "must lie in [0, 1]");
  require(n_positions >= 1, "kernel.n_positions", "must be >= 1");
}

void TrainConfig::validate() const {
  require(patch_size > 0 && patch_size % 8 == 0, "train.patch_size", "must be a positive multiple of 8");
  require(batch_size >= 1, "train.batch_size", "must be >= 1");
  require(epochs >= 1, "train.epochs", "must be >= 1");
  require(lr0 > 0.0, "train.lr0", "must be positive");
  require(lr_halve_every >= 1, "train.lr_halve_every", "must be >= 1");
  require(stage == 1 || stage == 2, "train.stage", "must be 1 or 2");
  require(checkpoint_every >= 1, "train.checkpoint_every", "must be >= 1");
  require(max_iterations >= 0, "train.max_iterations", "must be >= 0");
}

void Config::validate() const {
  model.validate();
  loss.validate();
  kernel.validate();
  train.validate();
}

Config parse_config(std::string_view text) {
  // '#' comments are accepted in addition to the ';' comments the ini reader knows.
  std::string filtered;
  std::istringstream lines{std::string(text)};
  for (std::string line; std::getline(lines, line);) {
    const std::string t = trim(line);
    if (!t.empty() && t.front() == '#') continue;
    filtered += line;
    filtered += '\n';
  }

  boost::property_tree::ptree tree;
  std::istringstream in(filtered);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }

  Config config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError("config key '" + section + "': keys must live inside a [section]");
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto& table = fields();
      const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) {
        return f.section == section && f.key == key;
      });
      if (it == table.end()) throw ConfigError("unknown config key '" + full + "'");
      it->set(config, value.data(), full);
    }
  }
  config.validate();
  return config;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const Config& config) {
  std::ostringstream out;
  std::string_view current;
  for (const auto& field : fields()) {
    if (field.section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << field.section << "]\n";
      current = field.section;
    }
    out << field.key << " = " << field.get(config) << '\n';
  }
  return out.str();
}

}  // namespace daf
