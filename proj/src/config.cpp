#include "milmix/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "milmix/errors.hpp"

namespace milmix {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size() || v < 0) throw std::invalid_argument(value);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ValidationError("config: " + key + " expects a non-negative integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config: " + key + " expects a number, got '" + value + "'");
  }
}

}  // namespace

std::string compact_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  for (int prec = 1; prec < 17; ++prec) {
    char probe[64];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    if (std::stod(probe) == v) return probe;
  }
  return buf;
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.epochs < 1) throw ValidationError("config: epochs must be >= 1");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw ValidationError("config: train_fraction must lie strictly between 0 and 1");
  }
  if (cfg.repeats < 1) throw ValidationError("config: repeats must be >= 1");
  if (!(cfg.lr > 0.0)) throw ValidationError("config: lr must be positive");
  if (!(cfg.augment.beta >= 0.0 && cfg.augment.beta <= 1.0)) {
    throw ValidationError("config: augment.beta must lie in [0,1]");
  }
}

std::string config_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "dataset=" << cfg.dataset << "\n";
  out << "model=" << to_string(cfg.model) << "\n";
  out << "augment.mode=" << to_string(cfg.augment.mode) << "\n";
  out << "augment.beta=" << compact_double(cfg.augment.beta) << "\n";
  out << "epochs=" << cfg.epochs << "\n";
  out << "lr=" << compact_double(cfg.lr) << "\n";
  out << "repeats=" << cfg.repeats << "\n";
  out << "train_fraction=" << compact_double(cfg.train_fraction) << "\n";
  out << "base_seed=" << cfg.base_seed << "\n";
  out << "bags_per_class=" << cfg.bags_per_class << "\n";
  out << "patches_per_bag=" << cfg.patches_per_bag << "\n";
  out << "output=" << cfg.output << "\n";
  return out.str();
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key == "dataset") {
    cfg.dataset = value;
  } else if (key == "model") {
    cfg.model = parse_model_kind(value);
  } else if (key == "augment.mode") {
    cfg.augment.mode = parse_augment_mode(value);
  } else if (key == "augment.beta") {
    cfg.augment.beta = parse_double(key, value);
  } else if (key == "epochs") {
    cfg.epochs = parse_size(key, value);
  } else if (key == "lr") {
    cfg.lr = parse_double(key, value);
  } else if (key == "repeats") {
    cfg.repeats = parse_size(key, value);
  } else if (key == "train_fraction") {
    cfg.train_fraction = parse_double(key, value);
  } else if (key == "base_seed") {
    try {
      std::size_t pos = 0;
      cfg.base_seed = std::stoull(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ValidationError("config: base_seed expects an unsigned integer, got '" + value + "'");
    }
  } else if (key == "bags_per_class") {
    cfg.bags_per_class = parse_size(key, value);
  } else if (key == "patches_per_bag") {
    cfg.patches_per_bag = parse_size(key, value);
  } else if (key == "output") {
    cfg.output = value;
  } else {
    throw ValidationError("config: unknown key '" + key + "'");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
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
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace milmix
