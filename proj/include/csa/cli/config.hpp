#ifndef CSA_CLI_CONFIG_HPP
#define CSA_CLI_CONFIG_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "csa/errors.hpp"
#include "csa/train/config.hpp"

namespace csa::cli {

/// 9 significant digits, the precision every emitted file uses.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace detail {

inline std::string join_numbers(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + format_number(v[i]);
  return out;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + std::to_string(v[i]);
  return out;
}

// "section.key" -> 1-based line of its definition, for error messages.
inline std::map<std::string, int> key_lines(const std::string& text) {
  std::map<std::string, int> out;
  std::istringstream in(text);
  std::string line, section;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == ';' || line[first] == '#') continue;
    if (line[first] == '[') {
      const auto close = line.find(']', first);
      section = line.substr(first + 1, close - first - 1);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto key = line.substr(first, eq - first);
    key.erase(key.find_last_not_of(" \t") + 1);
    out.emplace(section.empty() ? key : section + "." + key, n);
  }
  return out;
}

class Reader {
 public:
  Reader(const boost::property_tree::ptree& tree, std::string source, std::map<std::string, int> lines)
      : tree_(tree), source_(std::move(source)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    std::string where = source_;
    if (auto it = lines_.find(key); it != lines_.end()) where += ":" + std::to_string(it->second);
    throw ConfigError(where + ": " + key + ": " + what);
  }

  const std::string* raw(const std::string& key) {
    seen_.insert(key);
    auto node = tree_.get_child_optional(boost::property_tree::ptree::path_type(key, '.'));
    return node ? &node->data() : nullptr;
  }

  void text(const std::string& key, std::string& out) {
    if (auto v = raw(key)) out = *v;
  }

  void number(const std::string& key, double& out) {
    auto v = raw(key);
    if (!v) return;
    std::size_t used = 0;
    try {
      out = std::stod(*v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || v->find_first_not_of(" \t", used) != std::string::npos) {
      fail(key, "expected a number, got '" + *v + "'");
    }
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    auto v = raw(key);
    if (!v) return;
    std::istringstream in(*v);
    long long x = 0;
    std::string rest;
    if (!(in >> x) || (in >> rest) || x < 0) {
      fail(key, "expected a non-negative integer, got '" + *v + "'");
    }
    out = static_cast<Int>(x);
  }

  void boolean(const std::string& key, bool& out) {
    auto v = raw(key);
    if (!v) return;
    if (*v == "true" || *v == "1") out = true;
    else if (*v == "false" || *v == "0") out = false;
    else fail(key, "expected true or false, got '" + *v + "'");
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    auto v = raw(key);
    if (!v) return;
    std::istringstream in(*v);
    std::vector<double> parsed;
    std::string tok;
    while (in >> tok) {
      std::size_t used = 0;
      double x = 0;
      try {
        x = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) fail(key, "expected numbers, got '" + tok + "'");
      parsed.push_back(x);
    }
    out = std::move(parsed);
  }

  void sizes(const std::string& key, std::vector<std::size_t>& out) {
    auto v = raw(key);
    if (!v) return;
    std::istringstream in(*v);
    std::vector<std::size_t> parsed;
    std::string tok;
    while (in >> tok) {
      if (tok.find_first_not_of("0123456789") != std::string::npos) {
        fail(key, "expected non-negative integers, got '" + tok + "'");
      }
      parsed.push_back(std::stoull(tok));
    }
    out = std::move(parsed);
  }

  template <class Fn>
  void guarded(const std::string& key, Fn&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      fail(key, e.what());
    }
  }

  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty()) fail(section, "keys must live inside a [section]");
      for (const auto& [key, _] : body) {
        const auto full = section + "." + key;
        if (!seen_.count(full)) fail(full, "unknown key");
      }
    }
  }

 private:
  const boost::property_tree::ptree& tree_;
  std::string source_;
  std::map<std::string, int> lines_;
  std::set<std::string> seen_;
};

inline std::string resolve(const std::string& path, const std::filesystem::path& base) {
  if (path.empty() || base.empty()) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() ? path : (base / p).lexically_normal().string();
}

}  // namespace detail

/// Parses INI text. Relative file paths resolve against `base_dir` when given.
inline train::ExperimentConfig parse_config(const std::string& text,
                                            const std::string& source = "<config>",
                                            const std::filesystem::path& base_dir = {}) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  detail::Reader r(tree, source, detail::key_lines(text));
  train::ExperimentConfig c;

  r.text("experiment.name", c.name);
  r.text("experiment.preset", c.preset);
  r.integer("experiment.seed", c.seed);
  r.integer("experiment.repeats", c.repeats);
  r.integer("experiment.epochs", c.epochs);
  r.integer("experiment.batch_size", c.batch_size);
  r.text("experiment.output_dir", c.output_dir);
  r.boolean("experiment.wall_clock", c.wall_clock);
  r.numbers("experiment.gammas", c.gammas);
  r.numbers("experiment.fractions", c.fractions);
  if (auto v = r.raw("experiment.variants")) {
    c.variants.clear();
    std::istringstream names(*v);
    std::string name;
    while (names >> name) {
      r.guarded("experiment.variants", [&] { c.variants.push_back(train::parse_alignment(name)); });
    }
  }

  auto& d = c.data;
  r.text("data.kind", d.kind);
  r.integer("data.train_size", d.train_size);
  r.integer("data.test_size", d.test_size);
  r.integer("data.classes", d.classes);
  r.integer("data.image_size", d.image_size);
  r.number("data.noise", d.noise);
  r.text("data.train_images", d.train_images);
  r.text("data.train_labels", d.train_labels);
  r.text("data.test_images", d.test_images);
  r.text("data.test_labels", d.test_labels);
  r.integer("data.limit", d.limit);
  r.integer("data.test_limit", d.test_limit);

  auto& m = c.model;
  r.text("model.kind", m.kind);
  r.sizes("model.channels", m.channels);
  r.sizes("model.hidden", m.hidden);
  r.integer("model.embedding", m.embedding);

  auto& a = c.augmentation;
  r.text("augmentation.kind", a.kind);
  r.number("augmentation.alpha", a.alpha);
  if (auto pool = r.raw("augmentation.pool")) {
    a.chain.pool.clear();
    std::istringstream names(*pool);
    std::string name;
    while (names >> name) {
      r.guarded("augmentation.pool", [&] { a.chain.pool.push_back(augment::parse_primitive(name)); });
    }
  }
  r.integer("augmentation.width", a.chain.width);
  r.integer("augmentation.max_depth", a.chain.max_depth);
  r.number("augmentation.dirichlet_alpha", a.chain.dirichlet_alpha);
  r.number("augmentation.beta_alpha", a.chain.beta_alpha);

  auto& o = c.objective;
  if (auto v = r.raw("objective.alignment")) {
    r.guarded("objective.alignment", [&] { o.alignment = train::parse_alignment(*v); });
  }
  r.number("objective.gamma", o.gamma);
  r.number("objective.lambda_l", o.lambda_l);
  r.number("objective.margin", o.margin.margin);
  r.number("objective.supcon_temperature", o.supcon_temperature);

  auto& opt = c.optimizer;
  r.text("optimizer.kind", opt.kind);
  r.number("optimizer.lr", opt.lr);
  r.number("optimizer.momentum", opt.momentum);
  r.number("optimizer.beta2", opt.beta2);
  r.number("optimizer.epsilon", opt.epsilon);
  r.number("optimizer.weight_decay", opt.weight_decay);

  r.text("scheduler.kind", c.scheduler.kind);
  r.integer("scheduler.period", c.scheduler.period);
  r.number("scheduler.factor", c.scheduler.factor);

  r.integer("eval.every", c.eval.every);
  r.integer("eval.seed", c.eval.seed);
  r.text("eval.corruption_table", c.eval.corruption_table);

  r.reject_unknown();

  r.guarded("augmentation.kind", [&] { o.mode = train::ExperimentConfig::mode_for(a.kind); });
  if (o.mode == train::ObjectiveMode::normal) o.alignment = train::Alignment::none;
  for (auto* p : {&d.train_images, &d.train_labels, &d.test_images, &d.test_labels,
                  &c.eval.corruption_table}) {
    *p = detail::resolve(*p, base_dir);
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  if (d.kind == "idx") {
    for (const auto* p : {&d.train_images, &d.train_labels, &d.test_images, &d.test_labels}) {
      if (!std::filesystem::exists(*p)) throw ConfigError(source + ": missing data file '" + *p + "'");
    }
  }
  if (!c.eval.corruption_table.empty() && !std::filesystem::exists(c.eval.corruption_table)) {
    throw ConfigError(source + ": missing corruption table '" + c.eval.corruption_table + "'");
  }
  return c;
}

inline train::ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string(), path.parent_path());
}

/// Canonical form: every field, fixed order, fixed number formatting.
inline std::string serialize_config(const train::ExperimentConfig& c) {
  std::ostringstream os;
  const auto& d = c.data;
  const auto& a = c.augmentation;
  const auto& o = c.objective;
  const auto& opt = c.optimizer;
  os << "[experiment]\n"
     << "name = " << c.name << "\n"
     << "preset = " << c.preset << "\n"
     << "seed = " << c.seed << "\n"
     << "repeats = " << c.repeats << "\n"
     << "epochs = " << c.epochs << "\n"
     << "batch_size = " << c.batch_size << "\n"
     << "output_dir = " << c.output_dir << "\n"
     << "wall_clock = " << (c.wall_clock ? "true" : "false") << "\n"
     << "gammas = " << detail::join_numbers(c.gammas) << "\n"
     << "fractions = " << detail::join_numbers(c.fractions) << "\n"
     << "variants =";
  for (auto v : c.variants) os << ' ' << train::alignment_name(v);
  os << "\n\n";
  os << "[data]\n"
     << "kind = " << d.kind << "\n"
     << "train_size = " << d.train_size << "\n"
     << "test_size = " << d.test_size << "\n"
     << "classes = " << d.classes << "\n"
     << "image_size = " << d.image_size << "\n"
     << "noise = " << format_number(d.noise) << "\n"
     << "train_images = " << d.train_images << "\n"
     << "train_labels = " << d.train_labels << "\n"
     << "test_images = " << d.test_images << "\n"
     << "test_labels = " << d.test_labels << "\n"
     << "limit = " << d.limit << "\n"
     << "test_limit = " << d.test_limit << "\n\n";
  os << "[model]\n"
     << "kind = " << c.model.kind << "\n"
     << "channels = " << detail::join_sizes(c.model.channels) << "\n"
     << "hidden = " << detail::join_sizes(c.model.hidden) << "\n"
     << "embedding = " << c.model.embedding << "\n\n";
  os << "[augmentation]\n"
     << "kind = " << a.kind << "\n"
     << "alpha = " << format_number(a.alpha) << "\n"
     << "pool =";
  for (auto p : a.chain.pool) os << ' ' << augment::primitive_name(p);
  os << "\n"
     << "width = " << a.chain.width << "\n"
     << "max_depth = " << a.chain.max_depth << "\n"
     << "dirichlet_alpha = " << format_number(a.chain.dirichlet_alpha) << "\n"
     << "beta_alpha = " << format_number(a.chain.beta_alpha) << "\n\n";
  os << "[objective]\n"
     << "alignment = " << train::alignment_name(o.alignment) << "\n"
     << "gamma = " << format_number(o.gamma) << "\n"
     << "lambda_l = " << format_number(o.lambda_l) << "\n"
     << "margin = " << format_number(o.margin.margin) << "\n"
     << "supcon_temperature = " << format_number(o.supcon_temperature) << "\n\n";
  os << "[optimizer]\n"
     << "kind = " << opt.kind << "\n"
     << "lr = " << format_number(opt.lr) << "\n"
     << "momentum = " << format_number(opt.momentum) << "\n"
     << "beta2 = " << format_number(opt.beta2) << "\n"
     << "epsilon = " << format_number(opt.epsilon) << "\n"
     << "weight_decay = " << format_number(opt.weight_decay) << "\n\n";
  os << "[scheduler]\n"
     << "kind = " << c.scheduler.kind << "\n"
     << "period = " << c.scheduler.period << "\n"
     << "factor = " << format_number(c.scheduler.factor) << "\n\n";
  os << "[eval]\n"
     << "every = " << c.eval.every << "\n"
     << "seed = " << c.eval.seed << "\n"
     << "corruption_table = " << c.eval.corruption_table << "\n";
  std::string text = os.str();
  for (std::size_t pos; (pos = text.find(" \n")) != std::string::npos;) text.erase(pos, 1);
  return text;
}

/// FNV-1a over the canonical serialization, as 16 hex digits.
inline std::string config_hash(const train::ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace csa::cli

#endif  // CSA_CLI_CONFIG_HPP
