#include "bdl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "bdl/error.hpp"

namespace bdl {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t parse_uint(const std::string& raw) {
  const std::string s = trim(raw);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument("expected a non-negative integer, got '" + raw + "'");
  return v;
}

double parse_real(const std::string& raw) {
  const std::string s = trim(raw);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v))
    throw std::invalid_argument("expected a finite real number, got '" + raw + "'");
  return v;
}

bool parse_bool(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("expected true/false, got '" + raw + "'");
}

std::vector<std::size_t> parse_sizes(const std::string& raw) {
  std::vector<std::size_t> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(static_cast<std::size_t>(parse_uint(item)));
  }
  return out;
}

std::string real_text(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::vector<Field> fields(RunConfig& c) {
  auto uint_field = [](std::string sec, std::string key, auto& ref) {
    using T = std::remove_reference_t<decltype(ref)>;
    return Field{std::move(sec), std::move(key), [&ref](const std::string& s) { ref = static_cast<T>(parse_uint(s)); },
                 [&ref] { return std::to_string(ref); }};
  };
  auto real_field = [](std::string sec, std::string key, double& ref) {
    return Field{std::move(sec), std::move(key), [&ref](const std::string& s) { ref = parse_real(s); },
                 [&ref] { return real_text(ref); }};
  };
  auto bool_field = [](std::string sec, std::string key, bool& ref) {
    return Field{std::move(sec), std::move(key), [&ref](const std::string& s) { ref = parse_bool(s); },
                 [&ref] { return std::string(ref ? "true" : "false"); }};
  };

  std::vector<Field> f;
  f.push_back(uint_field("run", "seed", c.seed));

  f.push_back(uint_field("data", "num_clusters", c.data.num_clusters));
  f.push_back(uint_field("data", "positives_per_cluster", c.data.positives_per_cluster));
  f.push_back(uint_field("data", "input_dim", c.data.input_dim));
  f.push_back(uint_field("data", "latent_dim", c.data.latent_dim));
  f.push_back(real_field("data", "noise_easy", c.data.noise[0]));
  f.push_back(real_field("data", "noise_hard", c.data.noise[1]));
  f.push_back(real_field("data", "noise_tough", c.data.noise[2]));
  f.push_back(real_field("data", "false_negative_rate", c.data.false_negative_rate));
  f.push_back(real_field("data", "holdout_fraction", c.holdout_fraction));

  f.push_back(Field{"model", "hidden", [&c](const std::string& s) { c.hidden = parse_sizes(s); },
                    [&c] {
                      std::string out;
                      for (std::size_t i = 0; i < c.hidden.size(); ++i)
                        out += (i ? "," : "") + std::to_string(c.hidden[i]);
                      return out;
                    }});
  f.push_back(uint_field("model", "output_dim", c.output_dim));
  f.push_back(Field{"model", "activation", [&c](const std::string& s) { c.activation = parse_activation(trim(s)); },
                    [&c] { return std::string(to_string(c.activation)); }});

  f.push_back(Field{"loss", "kind", [&c](const std::string& s) { c.training.loss = parse_loss_kind(trim(s)); },
                    [&c] { return std::string(to_string(c.training.loss)); }});
  f.push_back(Field{"loss", "alpha",
                    [&c](const std::string& s) { c.training.balance.alpha = static_cast<int>(parse_uint(s)); },
                    [&c] { return std::to_string(c.training.balance.alpha); }});
  f.push_back(real_field("loss", "gamma", c.training.balance.gamma));
  f.push_back(real_field("loss", "margin", c.training.triplet.margin));

  f.push_back(bool_field("supervision", "unbiased", c.training.unbiased));
  f.push_back(Field{"supervision", "mode",
                    [&c](const std::string& s) {
                      const std::string v = trim(s);
                      if (v == "self") c.training.supervisor.mode = SupervisorMode::kSelf;
                      else if (v == "pretrained") c.training.supervisor.mode = SupervisorMode::kPretrained;
                      else throw std::invalid_argument("expected self or pretrained, got '" + s + "'");
                    },
                    [&c] {
                      return std::string(c.training.supervisor.mode == SupervisorMode::kSelf ? "self" : "pretrained");
                    }});
  f.push_back(Field{"supervision", "checkpoint",
                    [&c](const std::string& s) { c.training.supervisor.checkpoint = trim(s); },
                    [&c] { return c.training.supervisor.checkpoint.string(); }});
  f.push_back(real_field("supervision", "upper", c.training.supervisor.upper));
  f.push_back(real_field("supervision", "threshold", c.training.supervisor.threshold));
  f.push_back(real_field("supervision", "shape_k", c.training.supervisor.shape_k));

  f.push_back(uint_field("train", "steps", c.preliminary.steps));
  f.push_back(uint_field("train", "steps_per_epoch", c.preliminary.steps_per_epoch));
  f.push_back(uint_field("train", "batch_size", c.preliminary.batch_size));
  f.push_back(real_field("train", "max_lr", c.preliminary.max_lr));
  f.push_back(real_field("train", "warmup_fraction", c.preliminary.warmup_fraction));
  f.push_back(real_field("train", "min_lr", c.preliminary.min_lr));
  f.push_back(bool_field("train", "eval_each_epoch", c.eval_each_epoch));

  f.push_back(uint_field("anneal", "bs_start", c.anneal.bs_start));
  f.push_back(uint_field("anneal", "bs_end", c.anneal.bs_end));
  f.push_back(uint_field("anneal", "bs_step", c.anneal.bs_step));
  f.push_back(real_field("anneal", "thr_start", c.anneal.thr_start));
  f.push_back(real_field("anneal", "thr_step", c.anneal.thr_step));
  f.push_back(real_field("anneal", "lr_start", c.anneal.lr_start));
  f.push_back(real_field("anneal", "decay", c.anneal.decay));
  f.push_back(uint_field("anneal", "batches_per_iteration", c.anneal.batches_per_iteration));
  f.push_back(bool_field("anneal", "compounding_decay", c.anneal.compounding_decay));

  f.push_back(real_field("eval", "recall", c.eval.recall));
  f.push_back(uint_field("eval", "seed", c.eval.seed));

  f.push_back(uint_field("dump", "batches", c.dump_batches));
  f.push_back(uint_field("dump", "batch_size", c.dump_batch_size));
  return f;
}

}  // namespace

std::vector<std::size_t> RunConfig::layer_sizes() const {
  std::vector<std::size_t> sizes{data.input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output_dim);
  return sizes;
}

void RunConfig::validate() const {
  data.validate();
  require(holdout_fraction > 0.0 && holdout_fraction < 1.0, ErrorKind::kConfig,
          "data.holdout_fraction must be in (0, 1)");
  require(output_dim >= 1, ErrorKind::kConfig, "model.output_dim must be positive");
  for (std::size_t h : hidden) require(h >= 1, ErrorKind::kConfig, "model.hidden sizes must be positive");
  training.validate();
  preliminary.validate();
  anneal.validate();
  require(eval.recall > 0.0 && eval.recall <= 1.0, ErrorKind::kConfig, "eval.recall must be in (0, 1]");
  require(dump_batches >= 1 && dump_batch_size >= 2, ErrorKind::kConfig,
          "dump.batches must be >= 1 and dump.batch_size >= 2");

  const auto train_clusters = static_cast<std::size_t>(
      std::llround((1.0 - holdout_fraction) * static_cast<double>(data.num_clusters)));
  require(preliminary.batch_size <= train_clusters, ErrorKind::kConfig,
          "train.batch_size exceeds the " + std::to_string(train_clusters) + " training clusters");
  require(anneal.bs_start <= train_clusters, ErrorKind::kConfig,
          "anneal.bs_start exceeds the " + std::to_string(train_clusters) + " training clusters");
  require(dump_batch_size <= train_clusters, ErrorKind::kConfig,
          "dump.batch_size exceeds the " + std::to_string(train_clusters) + " training clusters");
}

std::string RunConfig::canonical() const {
  RunConfig copy = *this;
  std::ostringstream os;
  std::string section;
  for (const Field& f : fields(copy)) {
    if (f.section != section) {
      os << (section.empty() ? "" : "\n") << '[' << f.section << "]\n";
      section = f.section;
    }
    os << f.key << " = " << f.get() << '\n';
  }
  return os.str();
}

RunConfig parse_run_config(std::string_view text) {
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorKind::kConfig, std::string("malformed configuration: ") + e.message() + " (line " +
                                        std::to_string(e.line()) + ")");
  }

  RunConfig cfg;
  std::vector<Field> table = fields(cfg);
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty())
      throw Error(ErrorKind::kConfig, "key '" + section + "' outside of any section");
    for (const auto& [key, value] : keys) {
      const std::string path = section + "." + key;
      auto it = std::ranges::find_if(table, [&](const Field& f) { return f.section == section && f.key == key; });
      if (it == table.end()) throw Error(ErrorKind::kConfig, "unknown key " + path);
      try {
        it->set(value.data());
      } catch (const Error& e) {
        throw Error(ErrorKind::kConfig, path + ": " + e.what());
      } catch (const std::exception& e) {
        throw Error(ErrorKind::kConfig, path + ": " + e.what());
      }
    }
  }
  cfg.data.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfig, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : cfg.canonical()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace bdl
