#include "epibench/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "epibench/errors.hpp"

namespace epibench {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Raw key/value pairs plus used-flags; anything left unused at the end of
// parsing is an unknown key (fail-closed).
class KeyTable {
 public:
  explicit KeyTable(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("config: cannot open " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw FormatError("config: line " + std::to_string(line_no) + " is not 'key = value'");
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw FormatError("config: empty key at line " + std::to_string(line_no));
      if (!entries_.emplace(key, value).second) {
        throw FormatError("config: duplicate key '" + key + "'");
      }
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    used_.insert(key);
    return it->second;
  }

  std::string require_string(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw FormatError("config: missing required key '" + key + "'");
    used_.insert(key);
    return it->second;
  }

  double get_double(const std::string& key, double fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    used_.insert(key);
    return parse_double(key, it->second);
  }

  long get_long(const std::string& key, long fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    used_.insert(key);
    const std::string& v = it->second;
    char* end = nullptr;
    const long n = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') {
      throw FormatError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
    return n;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    used_.insert(key);
    const std::string& v = it->second;
    char* end = nullptr;
    const std::uint64_t n = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') {
      throw FormatError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
    return n;
  }

  std::vector<double> get_double_list(const std::string& key) {
    const std::string v = require_string(key);
    std::vector<double> out;
    std::stringstream ss(v);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(parse_double(key, trim(field)));
    if (out.empty()) throw FormatError("config: key '" + key + "' is an empty list");
    return out;
  }

  std::vector<std::string> get_string_list(const std::string& key) {
    const std::string v = require_string(key);
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string field;
    while (std::getline(ss, field, ',')) {
      field = trim(field);
      if (!field.empty()) out.push_back(field);
    }
    if (out.empty()) throw FormatError("config: key '" + key + "' is an empty list");
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : entries_) {
      if (!used_.count(key)) throw FormatError("config: unknown key '" + key + "'");
    }
  }

 private:
  static double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') {
      throw FormatError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
    return d;
  }

  std::map<std::string, std::string> entries_;
  std::set<std::string> used_;
};

SyntheticSpec read_synthetic_block(KeyTable& t, const std::string& prefix,
                                   const SyntheticSpec& defaults) {
  SyntheticSpec s = defaults;
  s.classes = static_cast<int>(t.get_long(prefix + ".classes", s.classes));
  s.dims = static_cast<int>(t.get_long(prefix + ".dims", s.dims));
  s.n_per_class = static_cast<int>(t.get_long(prefix + ".n_per_class", s.n_per_class));
  s.test_n_per_class = static_cast<int>(t.get_long(prefix + ".test_n_per_class", s.test_n_per_class));
  s.spread = t.get_double(prefix + ".spread", s.spread);
  s.shift = t.get_double(prefix + ".shift", s.shift);
  return s;
}

}  // namespace

ExperimentConfig parse_config(const std::string& path) {
  KeyTable t(path);
  ExperimentConfig cfg;

  cfg.dataset_kind = t.require_string("dataset.kind");
  if (cfg.dataset_kind == "synthetic") {
    cfg.synthetic = read_synthetic_block(t, "dataset", SyntheticSpec{});
  } else if (cfg.dataset_kind == "idx") {
    cfg.idx_train_images = t.require_string("dataset.train_images");
    cfg.idx_train_labels = t.require_string("dataset.train_labels");
    cfg.idx_test_images = t.require_string("dataset.test_images");
    cfg.idx_test_labels = t.require_string("dataset.test_labels");
  } else if (cfg.dataset_kind == "embedding_csv") {
    cfg.csv_train = t.require_string("dataset.train_csv");
    cfg.csv_test = t.require_string("dataset.test_csv");
    cfg.csv_classes = static_cast<int>(t.get_long("dataset.classes", 0));
  } else {
    throw FormatError("config: dataset.kind must be synthetic, idx, or embedding_csv");
  }

  cfg.ood_kind = t.get_string("ood.kind", "none");
  if (cfg.ood_kind == "synthetic") {
    SyntheticSpec d;
    d.shift = 4.0;
    cfg.ood_synthetic = read_synthetic_block(t, "ood", d);
  } else if (cfg.ood_kind == "idx") {
    cfg.ood_idx_images = t.require_string("ood.images");
    cfg.ood_idx_labels = t.require_string("ood.labels");
  } else if (cfg.ood_kind == "embedding_csv") {
    cfg.ood_csv = t.require_string("ood.csv");
  } else if (cfg.ood_kind != "none") {
    throw FormatError("config: ood.kind must be none, synthetic, idx, or embedding_csv");
  }

  cfg.fractions = t.get_double_list("fractions");
  {
    const auto widths = t.get_double_list("chain.base_widths");
    for (double w : widths) {
      if (w != std::floor(w) || w < 1) throw FormatError("config: chain.base_widths must be positive integers");
      cfg.base_widths.push_back(static_cast<int>(w));
    }
  }
  cfg.chain_steps = static_cast<int>(t.get_long("chain.steps", 1));
  cfg.dropout_p = t.get_double("arch.dropout_p", 0.3);

  TrainOptions opt;
  opt.learning_rate = t.get_double("optimizer.lr", 0.01);
  opt.momentum = t.get_double("optimizer.momentum", 0.95);
  opt.weight_decay = t.get_double("optimizer.weight_decay", 1e-4);
  opt.epochs = static_cast<int>(t.get_long("optimizer.epochs", 150));
  opt.batch_size = static_cast<int>(t.get_long("optimizer.batch_size", 128));
  opt.scheduler_patience = static_cast<int>(t.get_long("optimizer.scheduler_patience", 25));

  cfg.method_names = t.get_string_list("methods");
  for (const std::string& name : cfg.method_names) {
    MethodSpec spec;
    spec.kind = method_kind_from_name(name);
    spec.opt = opt;
    const std::string p = "method." + name + ".";
    spec.n_members = static_cast<int>(t.get_long(p + "n_members", 10));
    spec.k_order = static_cast<int>(t.get_long(p + "k_order", 1));
    spec.n_mc_passes = static_cast<int>(t.get_long(p + "n_mc_passes", 20));
    spec.loss.lambda_conflict = t.get_double(p + "lambda", 0.05);
    spec.loss.epsilon_ls = t.get_double(p + "epsilon", 0.1);
    spec.loss.beta_cp = t.get_double(p + "beta", 0.1);
    spec.loss.lambda_edl = t.get_double(p + "lambda_edl", 0.01);
    cfg.methods.push_back(spec);
  }

  cfg.validation_fraction = t.get_double("validation_fraction", 0.2);
  cfg.master_seed = t.get_u64("master_seed", 1234);
  cfg.output_dir = t.require_string("output_dir");
  cfg.sce_bins = static_cast<int>(t.get_long("sce_bins", 15));

  t.finish();
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (fractions.empty()) throw InputError("config: fractions must be non-empty");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (fractions[i] <= 0.0 || fractions[i] > 1.0) {
      throw InputError("config: fractions must lie in (0, 1]");
    }
    if (i > 0 && fractions[i] <= fractions[i - 1]) {
      throw InputError("config: fractions must be strictly ascending");
    }
  }
  if (chain_steps < 1) throw InputError("config: chain.steps must be >= 1");
  if (base_widths.empty()) throw InputError("config: chain.base_widths must be non-empty");
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw InputError("config: arch.dropout_p must lie in [0, 1)");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw InputError("config: validation_fraction must lie in [0, 1)");
  }
  if (sce_bins < 1) throw InputError("config: sce_bins must be >= 1");
  if (methods.empty()) throw InputError("config: methods must be non-empty");
  for (std::size_t i = 0; i < method_names.size(); ++i) {
    for (std::size_t j = i + 1; j < method_names.size(); ++j) {
      if (method_names[i] == method_names[j]) {
        throw InputError("config: method '" + method_names[i] + "' listed twice");
      }
    }
  }
  if (dataset_kind == "synthetic") {
    if (synthetic.classes < 2) throw InputError("config: dataset.classes must be >= 2");
    if (synthetic.dims < synthetic.classes) throw InputError("config: dataset.dims must be >= classes");
    if (synthetic.n_per_class < 1 || synthetic.test_n_per_class < 1) {
      throw InputError("config: dataset sample counts must be >= 1");
    }
    if (synthetic.spread < 0.0) throw InputError("config: dataset.spread must be non-negative");
  }
  // n_classes is only known after loading for file-backed datasets; the
  // synthetic class count lets the full loss check run here.
  const int known_classes = dataset_kind == "synthetic" ? synthetic.classes
                            : csv_classes > 0           ? csv_classes
                                                        : 10;
  for (const MethodSpec& m : methods) m.validate(known_classes);
  if (output_dir.empty()) throw InputError("config: output_dir must be set");
}

std::string canonical_config_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  char buf[40];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "dataset.kind=" << cfg.dataset_kind << "\n";
  if (cfg.dataset_kind == "synthetic") {
    out << "dataset.classes=" << cfg.synthetic.classes << "\n"
        << "dataset.dims=" << cfg.synthetic.dims << "\n"
        << "dataset.n_per_class=" << cfg.synthetic.n_per_class << "\n"
        << "dataset.test_n_per_class=" << cfg.synthetic.test_n_per_class << "\n"
        << "dataset.spread=" << num(cfg.synthetic.spread) << "\n"
        << "dataset.shift=" << num(cfg.synthetic.shift) << "\n";
  } else if (cfg.dataset_kind == "idx") {
    out << "dataset.train_images=" << cfg.idx_train_images << "\n"
        << "dataset.train_labels=" << cfg.idx_train_labels << "\n"
        << "dataset.test_images=" << cfg.idx_test_images << "\n"
        << "dataset.test_labels=" << cfg.idx_test_labels << "\n";
  } else {
    out << "dataset.train_csv=" << cfg.csv_train << "\n"
        << "dataset.test_csv=" << cfg.csv_test << "\n"
        << "dataset.classes=" << cfg.csv_classes << "\n";
  }
  out << "ood.kind=" << cfg.ood_kind << "\n";
  if (cfg.ood_kind == "synthetic") {
    out << "ood.classes=" << cfg.ood_synthetic.classes << "\n"
        << "ood.dims=" << cfg.ood_synthetic.dims << "\n"
        << "ood.test_n_per_class=" << cfg.ood_synthetic.test_n_per_class << "\n"
        << "ood.spread=" << num(cfg.ood_synthetic.spread) << "\n"
        << "ood.shift=" << num(cfg.ood_synthetic.shift) << "\n";
  } else if (cfg.ood_kind == "idx") {
    out << "ood.images=" << cfg.ood_idx_images << "\n"
        << "ood.labels=" << cfg.ood_idx_labels << "\n";
  } else if (cfg.ood_kind == "embedding_csv") {
    out << "ood.csv=" << cfg.ood_csv << "\n";
  }
  out << "fractions=";
  for (std::size_t i = 0; i < cfg.fractions.size(); ++i) {
    out << (i ? "," : "") << num(cfg.fractions[i]);
  }
  out << "\nchain.base_widths=";
  for (std::size_t i = 0; i < cfg.base_widths.size(); ++i) {
    out << (i ? "," : "") << cfg.base_widths[i];
  }
  out << "\nchain.steps=" << cfg.chain_steps << "\n"
      << "arch.dropout_p=" << num(cfg.dropout_p) << "\n";
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    const MethodSpec& m = cfg.methods[i];
    const std::string p = "method." + cfg.method_names[i] + ".";
    out << p << "n_members=" << m.n_members << "\n"
        << p << "k_order=" << m.k_order << "\n"
        << p << "n_mc_passes=" << m.n_mc_passes << "\n"
        << p << "lambda=" << num(m.loss.lambda_conflict) << "\n"
        << p << "epsilon=" << num(m.loss.epsilon_ls) << "\n"
        << p << "beta=" << num(m.loss.beta_cp) << "\n"
        << p << "lambda_edl=" << num(m.loss.lambda_edl) << "\n";
  }
  const TrainOptions& o = cfg.methods.front().opt;
  out << "optimizer.lr=" << num(o.learning_rate) << "\n"
      << "optimizer.momentum=" << num(o.momentum) << "\n"
      << "optimizer.weight_decay=" << num(o.weight_decay) << "\n"
      << "optimizer.epochs=" << o.epochs << "\n"
      << "optimizer.batch_size=" << o.batch_size << "\n"
      << "optimizer.scheduler_patience=" << o.scheduler_patience << "\n"
      << "validation_fraction=" << num(cfg.validation_fraction) << "\n"
      << "master_seed=" << cfg.master_seed << "\n"
      << "sce_bins=" << cfg.sce_bins << "\n";
  return out.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string text = canonical_config_text(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace epibench
