#include "harood/config.hpp"

#include <fstream>
#include <set>

#include "harood/checkpoint.hpp"

namespace harood {

namespace {

using nlohmann::json;

// Reads known keys from one JSON object and rejects everything else.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  void done() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + where(k) + "'");
  }

  template <typename T>
  void get(const char* key, T& value) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      value = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + where(key) + "' has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_optimizer(Section& s, OptimizerConfig& o) {
  s.get("learning_rate", o.learning_rate);
  s.get("beta1", o.beta1);
  s.get("beta2", o.beta2);
  s.get("epsilon", o.epsilon);
}

json optimizer_json(const OptimizerConfig& o) {
  return {{"learning_rate", o.learning_rate}, {"beta1", o.beta1}, {"beta2", o.beta2}, {"epsilon", o.epsilon}};
}

}  // namespace

std::string_view to_string(Baseline b) {
  switch (b) {
    case Baseline::msp: return "msp";
    case Baseline::maxlogit: return "maxlogit";
    case Baseline::energy: return "energy";
    case Baseline::odin: return "odin";
  }
  return "?";
}

Baseline baseline_from_string(std::string_view name) {
  for (Baseline b : {Baseline::msp, Baseline::maxlogit, Baseline::energy, Baseline::odin})
    if (to_string(b) == name) return b;
  throw ConfigError("unknown baseline '" + std::string(name) + "'");
}

std::vector<Baseline> parse_baselines(std::string_view list) {
  std::vector<Baseline> out;
  while (!list.empty()) {
    const auto comma = list.find(',');
    const std::string_view item = list.substr(0, comma);
    if (!item.empty()) {
      const Baseline b = baseline_from_string(item);
      if (std::find(out.begin(), out.end(), b) == out.end()) out.push_back(b);
    }
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  return out;
}

std::uint64_t RunConfig::dataset_seed() const { return mix_seed(seed, 1); }
std::uint64_t RunConfig::init_seed() const { return mix_seed(seed, 2); }
std::uint64_t RunConfig::stage1_seed() const { return mix_seed(seed, 3); }
std::uint64_t RunConfig::stage2_seed() const { return mix_seed(seed, 4); }

RunConfig default_run_config() { return RunConfig{}; }

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  root.get("seed", c.seed);
  std::string out = c.out.string();
  root.get("out", out);
  c.out = out;

  if (const json* r = root.child("radar")) {
    Section s(*r, "radar");
    s.get("n_rx", c.radar.n_rx);
    s.get("n_chirps", c.radar.n_chirps);
    s.get("n_samples", c.radar.n_samples);
    s.get("carrier_freq", c.radar.carrier_freq);
    s.get("bandwidth", c.radar.bandwidth);
    s.get("chirp_period", c.radar.chirp_period);
    s.get("frame_period", c.radar.frame_period);
    s.get("noise_std", c.radar.noise_std);
    s.done();
  }
  if (const json* p = root.child("preprocess")) {
    Section s(*p, "preprocess");
    s.get("erespd_window", c.preprocess.erespd_window);
    s.get("erespd_decay", c.preprocess.erespd_decay);
    s.get("sinc_length", c.preprocess.sinc_length);
    s.get("sinc_cutoff", c.preprocess.sinc_cutoff);
    s.done();
  }
  if (const json* d = root.child("dataset")) {
    Section s(*d, "dataset");
    s.get("samples_per_recording", c.dataset.samples_per_recording);
    if (const json* counts = s.child("counts")) {
      if (!counts->is_object()) throw ConfigError("dataset.counts must be an object");
      c.dataset.counts.clear();
      try {
        for (const auto& [split, kinds] : counts->items()) {
          auto& per_kind = c.dataset.counts[split_from_string(split)];
          if (!kinds.is_object()) throw ConfigError("dataset.counts." + split + " must be an object");
          for (const auto& [kind, n] : kinds.items()) per_kind[scene_kind_from_string(kind)] = n.get<int>();
        }
      } catch (const json::exception&) {
        throw ConfigError("dataset.counts entries must be integers");
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError(std::string("dataset.counts: ") + e.what());
      }
    }
    s.done();
  }
  if (const json* m = root.child("model")) c.model = network_config_from_json(*m);
  if (const json* t = root.child("stage1")) {
    Section s(*t, "stage1");
    s.get("total_epochs", c.stage1.total_epochs);
    s.get("contrastive_epochs", c.stage1.contrastive_epochs);
    s.get("batch_size", c.stage1.batch_size);
    s.get("batches_per_epoch", c.stage1.batches_per_epoch);
    s.get("triplet_margin", c.stage1.triplet_margin);
    s.get("contrastive_margin", c.stage1.contrastive_margin);
    if (const json* o = s.child("optimizer")) {
      Section os(*o, "stage1.optimizer");
      read_optimizer(os, c.stage1.optimizer);
      os.done();
    }
    s.done();
  }
  if (const json* t = root.child("stage2")) {
    Section s(*t, "stage2");
    s.get("epochs", c.stage2.epochs);
    s.get("batch_size", c.stage2.batch_size);
    if (const json* o = s.child("optimizer")) {
      Section os(*o, "stage2.optimizer");
      read_optimizer(os, c.stage2.optimizer);
      os.done();
    }
    s.done();
  }
  if (const json* e = root.child("evaluation")) {
    Section s(*e, "evaluation");
    s.get("target_tpr", c.evaluation.target_tpr);
    s.get("energy_temperature", c.evaluation.energy_temperature);
    s.get("odin_temperature", c.evaluation.odin.temperature);
    s.get("odin_epsilon", c.evaluation.odin.epsilon);
    s.get("timing_repeats", c.evaluation.timing_repeats);
    s.done();
  }
  if (const json* b = root.child("baselines")) {
    if (!b->is_array()) throw ConfigError("baselines must be an array of names");
    c.baselines.clear();
    for (const auto& name : *b) {
      if (!name.is_string()) throw ConfigError("baselines must be an array of names");
      c.baselines.push_back(baseline_from_string(name.get<std::string>()));
    }
  }
  root.done();
  c.radar.validate();
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json counts = json::object();
  for (const auto& [split, kinds] : c.dataset.counts) {
    json k = json::object();
    for (const auto& [kind, n] : kinds) k[std::string(to_string(kind))] = n;
    counts[std::string(to_string(split))] = k;
  }
  json baselines = json::array();
  for (Baseline b : c.baselines) baselines.push_back(to_string(b));
  return {
      {"seed", c.seed},
      {"out", c.out.string()},
      {"radar",
       {{"n_rx", c.radar.n_rx},
        {"n_chirps", c.radar.n_chirps},
        {"n_samples", c.radar.n_samples},
        {"carrier_freq", c.radar.carrier_freq},
        {"bandwidth", c.radar.bandwidth},
        {"chirp_period", c.radar.chirp_period},
        {"frame_period", c.radar.frame_period},
        {"noise_std", c.radar.noise_std}}},
      {"preprocess",
       {{"erespd_window", c.preprocess.erespd_window},
        {"erespd_decay", c.preprocess.erespd_decay},
        {"sinc_length", c.preprocess.sinc_length},
        {"sinc_cutoff", c.preprocess.sinc_cutoff}}},
      {"dataset", {{"samples_per_recording", c.dataset.samples_per_recording}, {"counts", counts}}},
      {"model", network_config_to_json(c.model)},
      {"stage1",
       {{"total_epochs", c.stage1.total_epochs},
        {"contrastive_epochs", c.stage1.contrastive_epochs},
        {"batch_size", c.stage1.batch_size},
        {"batches_per_epoch", c.stage1.batches_per_epoch},
        {"triplet_margin", c.stage1.triplet_margin},
        {"contrastive_margin", c.stage1.contrastive_margin},
        {"optimizer", optimizer_json(c.stage1.optimizer)}}},
      {"stage2",
       {{"epochs", c.stage2.epochs},
        {"batch_size", c.stage2.batch_size},
        {"optimizer", optimizer_json(c.stage2.optimizer)}}},
      {"evaluation",
       {{"target_tpr", c.evaluation.target_tpr},
        {"energy_temperature", c.evaluation.energy_temperature},
        {"odin_temperature", c.evaluation.odin.temperature},
        {"odin_epsilon", c.evaluation.odin.epsilon},
        {"timing_repeats", c.evaluation.timing_repeats}}},
      {"baselines", baselines},
  };
}

RunConfig load_run_config(const std::string& name_or_path) {
  if (name_or_path == "default") return default_run_config();
  std::ifstream f(name_or_path);
  if (!f) throw ConfigError("config file not found: " + name_or_path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(name_or_path + ": invalid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void write_config_snapshot(const RunConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream f(dir / "config.json");
  if (!f) throw Error("cannot write " + (dir / "config.json").string());
  f << run_config_to_json(config).dump(2) << '\n';
}

}  // namespace harood
