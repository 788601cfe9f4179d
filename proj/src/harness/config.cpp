#include "csagan/harness/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace csagan {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + want);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* want) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) bad_value(key, value, want);
  return out;
}

template <typename T>
std::string format_number(T v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename M>
Field int_field(std::string key, M member) {
  return {key, [member](const RunConfig& c) { return format_number(member(const_cast<RunConfig&>(c))); },
          [key, member](RunConfig& c, const std::string& v) {
            member(c) = parse_number<std::remove_reference_t<decltype(member(c))>>(key, v, "an integer");
          }};
}

template <typename M>
Field real_field(std::string key, M member) {
  return {key, [member](const RunConfig& c) { return format_number(member(const_cast<RunConfig&>(c))); },
          [key, member](RunConfig& c, const std::string& v) {
            member(c) = parse_number<double>(key, v, "a number");
          }};
}

template <typename M>
Field string_field(std::string key, M member) {
  return {key, [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)); },
          [member](RunConfig& c, const std::string& v) { member(c) = v; }};
}

Field bool_field(std::string key, std::function<bool&(RunConfig&)> member) {
  return {key, [member](const RunConfig& c) -> std::string {
            return member(const_cast<RunConfig&>(c)) ? "true" : "false";
          },
          [key, member](RunConfig& c, const std::string& v) {
            if (v == "true" || v == "1") {
              member(c) = true;
            } else if (v == "false" || v == "0") {
              member(c) = false;
            } else {
              bad_value(key, v, "a boolean");
            }
          }};
}

Field depths_field() {
  const std::string key = "discriminator.depths";
  return {key,
          [](const RunConfig& c) {
            if (c.discriminator.depths.empty()) return std::string("auto");
            std::string out;
            for (int d : c.discriminator.depths) out += (out.empty() ? "" : ",") + std::to_string(d);
            return out;
          },
          [key](RunConfig& c, const std::string& v) {
            c.discriminator.depths.clear();
            if (v == "auto" || v.empty()) return;
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ',')) {
              c.discriminator.depths.push_back(parse_number<int>(key, trim(item), "an integer list"));
            }
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(int_field("run.seed", [](RunConfig& c) -> uint64_t& { return c.seed; }));
    f.push_back(int_field("run.image_side", [](RunConfig& c) -> int& { return c.image_side; }));
    f.push_back(int_field("run.batch_size", [](RunConfig& c) -> int& { return c.batch_size; }));
    f.push_back(int_field("generator.base_channels",
                          [](RunConfig& c) -> int& { return c.generator.base_channels; }));
    f.push_back(int_field("generator.n_down", [](RunConfig& c) -> int& { return c.generator.n_down; }));
    f.push_back(int_field("generator.max_channels",
                          [](RunConfig& c) -> int& { return c.generator.max_channels; }));
    f.push_back(bool_field("generator.csam", [](RunConfig& c) -> bool& { return c.generator.csam_enabled; }));
    f.push_back(int_field("discriminator.n_d", [](RunConfig& c) -> int& { return c.discriminator.n_d; }));
    f.push_back(int_field("discriminator.shared_depth",
                          [](RunConfig& c) -> int& { return c.discriminator.shared_depth; }));
    f.push_back(depths_field());
    f.push_back(int_field("discriminator.kernel", [](RunConfig& c) -> int& { return c.discriminator.kernel; }));
    f.push_back(int_field("discriminator.stride", [](RunConfig& c) -> int& { return c.discriminator.stride; }));
    f.push_back(int_field("discriminator.base_channels",
                          [](RunConfig& c) -> int& { return c.discriminator.base_channels; }));
    f.push_back(int_field("discriminator.max_channels",
                          [](RunConfig& c) -> int& { return c.discriminator.max_channels; }));
    for (int s = 0; s < 3; ++s) {
      const std::string p = "stage" + std::to_string(s + 1) + ".";
      f.push_back(int_field(p + "epochs", [s](RunConfig& c) -> int& { return c.stages[s].epochs; }));
      f.push_back(real_field(p + "lr_g", [s](RunConfig& c) -> double& { return c.stages[s].lr_g; }));
      f.push_back(real_field(p + "lr_d", [s](RunConfig& c) -> double& { return c.stages[s].lr_d; }));
      f.push_back(real_field(p + "decay_at", [s](RunConfig& c) -> double& { return c.stages[s].decay_at; }));
      f.push_back(real_field(p + "decay_factor",
                             [s](RunConfig& c) -> double& { return c.stages[s].decay_factor; }));
    }
    f.push_back(real_field("loss.lambda", [](RunConfig& c) -> double& { return c.loss.lambda; }));
    f.push_back(real_field("loss.mu", [](RunConfig& c) -> double& { return c.loss.mu; }));
    f.push_back(string_field("data.source", [](RunConfig& c) -> std::string& { return c.data.source; }));
    f.push_back(string_field("data.pairs", [](RunConfig& c) -> std::string& { return c.data.pairs; }));
    f.push_back(real_field("data.tau", [](RunConfig& c) -> double& { return c.data.tau; }));
    f.push_back(int_field("data.lmin", [](RunConfig& c) -> int& { return c.data.lmin; }));
    f.push_back(real_field("data.split", [](RunConfig& c) -> double& { return c.data.split; }));
    f.push_back(int_field("data.toy_count", [](RunConfig& c) -> int& { return c.data.toy_count; }));
    f.push_back(real_field("data.toy_tau_min", [](RunConfig& c) -> double& { return c.data.toy_tau_min; }));
    f.push_back(real_field("data.toy_tau_max", [](RunConfig& c) -> double& { return c.data.toy_tau_max; }));
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("config key '" + key + "': " + what);
}

}  // namespace

GeneratorConfig RunConfig::generator_config() const {
  GeneratorConfig g = generator;
  g.image_side = image_side;
  return g;
}

DiscriminatorConfig RunConfig::discriminator_config() const {
  DiscriminatorConfig d = discriminator;
  d.image_side = image_side;
  return d;
}

void RunConfig::validate() const {
  require(image_side > 0, "run.image_side", "must be positive");
  require(batch_size >= 1, "run.batch_size", "must be >= 1");
  try {
    generator_config().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid generator config: ") + e.what());
  }
  try {
    discriminator_config().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid discriminator config: ") + e.what());
  }
  for (int s = 0; s < 3; ++s) {
    require(stages[s].stage == s + 1, "stage" + std::to_string(s + 1), "stage index mismatch");
    try {
      stages[s].validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("invalid config section 'stage" + std::to_string(s + 1) + "': " + e.what());
    }
  }
  require(std::isfinite(loss.lambda) && loss.lambda >= 0, "loss.lambda", "must be finite and >= 0");
  require(std::isfinite(loss.mu) && loss.mu >= 0, "loss.mu", "must be finite and >= 0");
  require(data.source == "toy" || data.source == "pairs", "data.source", "must be 'toy' or 'pairs'");
  require(data.source != "pairs" || !data.pairs.empty(), "data.pairs",
          "required when data.source = pairs");
  require(data.tau >= 0 && data.tau <= 1, "data.tau", "must lie in [0, 1]");
  require(data.lmin >= 1, "data.lmin", "must be >= 1");
  require(data.split > 0 && data.split < 1, "data.split", "must lie in (0, 1)");
  require(data.toy_count >= 2, "data.toy_count", "must be >= 2");
  require(data.toy_tau_min >= 0 && data.toy_tau_min <= 1, "data.toy_tau_min", "must lie in [0, 1]");
  require(data.toy_tau_max >= data.toy_tau_min && data.toy_tau_max <= 1, "data.toy_tau_max",
          "must lie in [toy_tau_min, 1]");
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  f->set(config, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    set_config_value(base, trim(std::string_view(t).substr(0, eq)),
                     trim(std::string_view(t).substr(eq + 1)));
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

}  // namespace csagan
