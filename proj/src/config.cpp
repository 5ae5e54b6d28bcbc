#include "mspc/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mspc/error.hpp"

namespace mspc {
namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool bare_word(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

class LineError {
 public:
  LineError(const std::string& source, int line) : prefix_(source + ":" + std::to_string(line) + ": ") {}
  [[noreturn]] void operator()(const std::string& msg) const { throw ConfigError(prefix_ + msg); }

 private:
  std::string prefix_;
};

std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_str && c == '\\') {
      ++i;
      continue;
    }
    if (c == '"') in_str = !in_str;
    if (c == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

ConfigScalar parse_scalar(const std::string& raw, const LineError& fail) {
  const std::string s = trim(raw);
  if (s.empty()) fail("missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') fail("unterminated string " + s);
    std::string out;
    for (size_t i = 1; i + 1 < s.size(); ++i) {
      char c = s[i];
      if (c == '"') fail("unexpected quote inside string " + s);
      if (c == '\\') {
        if (i + 2 >= s.size()) fail("dangling escape in " + s);
        const char e = s[++i];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unknown escape \\") + e);
        }
      }
      out.push_back(c);
    }
    return out;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  const std::string digits = s.front() == '+' || s.front() == '-' ? s.substr(1) : s;
  if (!digits.empty() && digits.find_first_not_of("0123456789_") == std::string::npos) {
    std::string clean;
    for (char c : s)
      if (c != '_') clean.push_back(c);
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(clean.c_str(), &end, 10);
    if (errno != 0 || *end != '\0') fail("integer out of range: " + s);
    return static_cast<int64_t>(v);
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || s.find_first_of("xXpP") != std::string::npos)
    fail("cannot parse value '" + s + "' (strings need double quotes)");
  return v;
}

std::vector<ConfigScalar> parse_array(const std::string& s, const LineError& fail) {
  if (s.back() != ']') fail("unterminated array " + s);
  const std::string body = trim(s.substr(1, s.size() - 2));
  std::vector<ConfigScalar> out;
  if (body.empty()) return out;
  std::string cur;
  bool in_str = false;
  for (size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (in_str && c == '\\' && i + 1 < body.size()) {
      cur.push_back(c);
      cur.push_back(body[++i]);
      continue;
    }
    if (c == '"') in_str = !in_str;
    if (c == '[' && !in_str) fail("nested arrays are not supported");
    if (c == ',' && !in_str) {
      out.push_back(parse_scalar(cur, fail));
      cur.clear();
      continue;
    }
    cur.push_back(c);
  }
  if (!trim(cur).empty()) out.push_back(parse_scalar(cur, fail));
  return out;
}

const char* type_name(const ConfigScalar& v) {
  switch (v.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    case 2: return "float";
    default: return "string";
  }
}

/// Typed access to one section; remembers which keys were consumed.
class SectionReader {
 public:
  SectionReader(const ConfigDocument& doc, const std::string& name) : doc_(doc), name_(name) {
    auto it = doc.sections.find(name);
    if (it != doc.sections.end()) entries_ = &it->second;
  }

  void get(const std::string& key, int& dst) {
    if (const ConfigValue* v = find(key)) {
      const int64_t x = scalar_int(*v, key);
      if (x < INT32_MIN || x > INT32_MAX) fail(*v, key + " is out of range");
      dst = static_cast<int>(x);
    }
  }
  void get(const std::string& key, uint64_t& dst) {
    if (const ConfigValue* v = find(key)) {
      const int64_t x = scalar_int(*v, key);
      if (x < 0) fail(*v, key + " must be non-negative");
      dst = static_cast<uint64_t>(x);
    }
  }
  void get(const std::string& key, double& dst) {
    if (const ConfigValue* v = find(key)) {
      const ConfigScalar& s = scalar(*v, key);
      if (const auto* i = std::get_if<int64_t>(&s))
        dst = static_cast<double>(*i);
      else if (const auto* d = std::get_if<double>(&s))
        dst = *d;
      else
        fail(*v, key + " must be a number, got " + type_name(s));
    }
  }
  void get(const std::string& key, std::string& dst) {
    if (const ConfigValue* v = find(key)) {
      const ConfigScalar& s = scalar(*v, key);
      if (const auto* str = std::get_if<std::string>(&s))
        dst = *str;
      else
        fail(*v, key + " must be a string, got " + type_name(s));
    }
  }
  template <class Fn>
  void get_enum(const std::string& key, Fn parse) {
    std::string s;
    get(key, s);
    if (const ConfigValue* v = find(key)) {
      try {
        parse(s);
      } catch (const ConfigError& e) {
        fail(*v, e.what());
      }
    }
  }
  void get(const std::string& key, std::vector<std::string>& dst) {
    if (const ConfigValue* v = find(key)) {
      dst.clear();
      for (const auto& s : array(*v, key)) {
        const auto* str = std::get_if<std::string>(&s);
        if (!str) fail(*v, key + " must be an array of strings");
        dst.push_back(*str);
      }
    }
  }
  void get(const std::string& key, std::vector<uint64_t>& dst) {
    if (const ConfigValue* v = find(key)) {
      dst.clear();
      for (const auto& s : array(*v, key)) {
        const auto* i = std::get_if<int64_t>(&s);
        if (!i || *i < 0) fail(*v, key + " must be an array of non-negative integers");
        dst.push_back(static_cast<uint64_t>(*i));
      }
    }
  }

  /// Rejects keys nobody asked for.
  void finish() const {
    if (!entries_) return;
    for (const auto& [key, v] : *entries_)
      if (!used_.count(key)) fail(v, "unknown key '" + key + "' in [" + name_ + "]");
  }

 private:
  const ConfigValue* find(const std::string& key) {
    used_.insert(key);
    if (!entries_) return nullptr;
    auto it = entries_->find(key);
    return it == entries_->end() ? nullptr : &it->second;
  }
  [[noreturn]] void fail(const ConfigValue& v, const std::string& msg) const { LineError(doc_.source, v.line)(msg); }
  const ConfigScalar& scalar(const ConfigValue& v, const std::string& key) const {
    const auto* s = std::get_if<ConfigScalar>(&v.value);
    if (!s) fail(v, name_ + "." + key + " must be a single value, not an array");
    return *s;
  }
  const std::vector<ConfigScalar>& array(const ConfigValue& v, const std::string& key) const {
    const auto* a = std::get_if<std::vector<ConfigScalar>>(&v.value);
    if (!a) fail(v, name_ + "." + key + " must be an array");
    return *a;
  }
  int64_t scalar_int(const ConfigValue& v, const std::string& key) const {
    const ConfigScalar& s = scalar(v, key);
    const auto* i = std::get_if<int64_t>(&s);
    if (!i) fail(v, name_ + "." + key + " must be an integer, got " + type_name(s));
    return *i;
  }

  const ConfigDocument& doc_;
  std::string name_;
  const std::map<std::string, ConfigValue>* entries_ = nullptr;
  std::set<std::string> used_;
};

const std::set<std::string> kSections = {"task", "model", "train", "constraint", "eval", "output", "compare"};

/// Prefixes a validation message of the form "section.key ..." with the
/// line where that key was set.
[[noreturn]] void rethrow_with_line(const ConfigDocument& doc, const ConfigError& e) {
  const std::string msg = e.what();
  const size_t dot = msg.find('.');
  const size_t end = msg.find_first_of(" ,", dot == std::string::npos ? 0 : dot);
  if (dot != std::string::npos && end != std::string::npos) {
    std::string sec = msg.substr(0, dot), key = msg.substr(dot + 1, end - dot - 1);
    if (sec == "model" && key == "image_size") sec = "task", key = "size";  // derived from task.size
    auto s = doc.sections.find(sec);
    if (s != doc.sections.end()) {
      auto k = s->second.find(key);
      if (k != s->second.end()) throw ConfigError(doc.source + ":" + std::to_string(k->second.line) + ": " + msg);
    }
  }
  throw ConfigError(doc.source + ": " + msg);
}

}  // namespace

ConfigDocument parse_config_text(const std::string& text, const std::string& source) {
  ConfigDocument doc;
  doc.source = source;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const LineError fail(source, line_no);
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header " + line);
      section = trim(line.substr(1, line.size() - 2));
      if (!bare_word(section)) fail("invalid section name '" + section + "'");
      if (!kSections.count(section)) fail("unknown section [" + section + "]");
      if (doc.sections.count(section)) fail("duplicate section [" + section + "]");
      doc.sections[section];
      doc.section_lines[section] = line_no;
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!bare_word(key)) fail("invalid key '" + key + "'");
    if (section.empty()) fail("key '" + key + "' appears before any [section]");
    auto& entries = doc.sections[section];
    if (entries.count(key)) fail("duplicate key '" + key + "' in [" + section + "]");
    ConfigValue v;
    v.line = line_no;
    if (!value.empty() && value.front() == '[')
      v.value = parse_array(value, fail);
    else
      v.value = parse_scalar(value, fail);
    entries.emplace(key, std::move(v));
  }
  return doc;
}

void ExperimentConfig::validate() const {
  if (task.name != "shapes" && task.name != "misaligned" && task.name != "folder")
    throw ConfigError("task.name must be shapes, misaligned or folder, got '" + task.name + "'");
  if (task.name == "folder") {
    if (!std::filesystem::is_directory(task.source_dir))
      throw ConfigError("task.source_dir does not exist: " + task.source_dir);
    if (!std::filesystem::is_directory(task.target_dir))
      throw ConfigError("task.target_dir does not exist: " + task.target_dir);
  } else {
    if (task.n < 2) throw ConfigError("task.n must be at least 2, got " + std::to_string(task.n));
    if (task.name == "misaligned") {
      if (!(task.scale_gap >= 1.0 / 3.0 && task.scale_gap <= 3.0))
        throw ConfigError("task.scale_gap must lie in [1/3, 3]");
      if (!(std::abs(task.shift_gap) <= 0.25)) throw ConfigError("task.shift_gap must lie in [-0.25, 0.25]");
    }
  }
  model.validate();
  train.validate();
  constraint.validate();
  if (eval.metrics.projections < 1) throw ConfigError("eval.projections must be at least 1");
  if (!(eval.metrics.tau > 0)) throw ConfigError("eval.tau must be positive");
  if (eval.eval_every < 0) throw ConfigError("eval.eval_every must be non-negative");
  if (output.checkpoint_every < 0) throw ConfigError("output.checkpoint_every must be non-negative");
  if (output.sample_every < 0) throw ConfigError("output.sample_every must be non-negative");
  for (const auto& r : compare.regularizers) parse_regularizer(r);
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source) {
  const ConfigDocument doc = parse_config_text(text, source);
  ExperimentConfig cfg;

  SectionReader task(doc, "task");
  task.get("name", cfg.task.name);
  task.get("n", cfg.task.n);
  task.get("size", cfg.task.size);
  task.get("seed", cfg.task.seed);
  task.get("scale_gap", cfg.task.scale_gap);
  task.get("shift_gap", cfg.task.shift_gap);
  task.get("source_dir", cfg.task.source_dir);
  task.get("target_dir", cfg.task.target_dir);
  task.finish();

  SectionReader model(doc, "model");
  model.get("base_width", cfg.model.base_width);
  model.get("num_blocks", cfg.model.num_blocks);
  model.get("grid_K", cfg.model.grid_K);
  model.get("grid_offset_scale", cfg.model.grid_offset_scale);
  model.finish();
  cfg.model.image_size = cfg.task.size;
  cfg.model.image_channels = 3;

  SectionReader train(doc, "train");
  train.get("batch_size", cfg.train.batch_size);
  train.get("lr", cfg.train.lr);
  train.get("beta1", cfg.train.beta1);
  train.get("beta2", cfg.train.beta2);
  train.get("epochs", cfg.train.epochs);
  train.get("lambda_consistency", cfg.train.lambda_consistency);
  train.get("lambda_align", cfg.train.lambda_align);
  train.get_enum("generator_loss_form",
                 [&](const std::string& s) { cfg.train.generator_loss_form = parse_generator_loss_form(s); });
  train.get_enum("regularizer", [&](const std::string& s) { cfg.train.regularizer = parse_regularizer(s); });
  train.get("seed", cfg.train.seed);
  train.get("vat_epsilon", cfg.train.vat_epsilon);
  train.get("vat_xi", cfg.train.vat_xi);
  train.get("mt_decay", cfg.train.mt_decay);
  train.finish();

  SectionReader constraint(doc, "constraint");
  constraint.get("a", cfg.constraint.a);
  constraint.get("b_trans", cfg.constraint.b_trans);
  constraint.get("weight", cfg.constraint.weight);
  constraint.get_enum("translation_penalty",
                      [&](const std::string& s) { cfg.constraint.translation_penalty = parse_penalty_form(s); });
  constraint.finish();

  SectionReader eval(doc, "eval");
  eval.get("projections", cfg.eval.metrics.projections);
  eval.get("seed", cfg.eval.metrics.seed);
  eval.get("tau", cfg.eval.metrics.tau);
  eval.get("eval_every", cfg.eval.eval_every);
  eval.finish();

  SectionReader output(doc, "output");
  output.get("dir", cfg.output.dir);
  output.get("checkpoint_every", cfg.output.checkpoint_every);
  output.get("sample_every", cfg.output.sample_every);
  output.finish();

  SectionReader compare(doc, "compare");
  compare.get("regularizers", cfg.compare.regularizers);
  compare.get("seeds", cfg.compare.seeds);
  compare.finish();

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    rethrow_with_line(doc, e);
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), path);
}

std::string canonical_config(const ExperimentConfig& c) {
  std::ostringstream os;
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "task.name=" << c.task.name << "\n"
     << "task.n=" << c.task.n << "\n"
     << "task.size=" << c.task.size << "\n"
     << "task.seed=" << c.task.seed << "\n"
     << "task.scale_gap=" << num(c.task.scale_gap) << "\n"
     << "task.shift_gap=" << num(c.task.shift_gap) << "\n"
     << "task.source_dir=" << c.task.source_dir << "\n"
     << "task.target_dir=" << c.task.target_dir << "\n"
     << "model.image_channels=" << c.model.image_channels << "\n"
     << "model.image_size=" << c.model.image_size << "\n"
     << "model.base_width=" << c.model.base_width << "\n"
     << "model.num_blocks=" << c.model.num_blocks << "\n"
     << "model.grid_K=" << c.model.grid_K << "\n"
     << "model.grid_offset_scale=" << num(c.model.grid_offset_scale) << "\n"
     << "train.batch_size=" << c.train.batch_size << "\n"
     << "train.lr=" << num(c.train.lr) << "\n"
     << "train.beta1=" << num(c.train.beta1) << "\n"
     << "train.beta2=" << num(c.train.beta2) << "\n"
     << "train.epochs=" << c.train.epochs << "\n"
     << "train.lambda_consistency=" << num(c.train.lambda_consistency) << "\n"
     << "train.lambda_align=" << num(c.train.lambda_align) << "\n"
     << "train.generator_loss_form=" << to_string(c.train.generator_loss_form) << "\n"
     << "train.regularizer=" << to_string(c.train.regularizer) << "\n"
     << "train.seed=" << c.train.seed << "\n"
     << "train.vat_epsilon=" << num(c.train.vat_epsilon) << "\n"
     << "train.vat_xi=" << num(c.train.vat_xi) << "\n"
     << "train.mt_decay=" << num(c.train.mt_decay) << "\n"
     << "constraint.a=" << num(c.constraint.a) << "\n"
     << "constraint.b_trans=" << num(c.constraint.b_trans) << "\n"
     << "constraint.weight=" << num(c.constraint.weight) << "\n"
     << "constraint.translation_penalty=" << to_string(c.constraint.translation_penalty) << "\n";
  return os.str();
}

uint64_t config_digest(const ExperimentConfig& cfg) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canonical_config(cfg)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string digest_hex(uint64_t digest) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace mspc
