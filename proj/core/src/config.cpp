#include "blocksketch/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace blocksketch {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::proposed: return "proposed";
    case Scheme::std_omp: return "std_omp";
    case Scheme::lte_ra: return "lte_ra";
    case Scheme::cluster_head: return "cluster_head";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "proposed") return Scheme::proposed;
  if (name == "std_omp") return Scheme::std_omp;
  if (name == "lte_ra") return Scheme::lte_ra;
  if (name == "cluster_head") return Scheme::cluster_head;
  throw ConfigError("unknown scheme '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (clusters < 1 || cluster_size < 1) {
    throw ConfigError("clusters and cluster_size must be positive");
  }
  if (active_clusters < 1 || active_clusters > clusters) {
    throw ConfigError("active_clusters must lie in [1, clusters]");
  }
  const int eligible = cluster_size - (mode == DuplexMode::half_duplex ? 1 : 0);
  if (active_per_cluster < 1 || active_per_cluster > eligible) {
    throw ConfigError("active_per_cluster must lie in [1, cluster_size" +
                      std::string(mode == DuplexMode::half_duplex ? " - 1]" : "]") +
                      " (half-duplex reserves the cluster head)");
  }
  if (rows_per_stage && *rows_per_stage < 1) {
    throw ConfigError("rows_per_stage must be positive");
  }
  if (stages && *stages < 1) {
    throw ConfigError("stages must be positive");
  }
  if (!(theta > 0.5) || theta > 1.0) {
    throw ConfigError("theta must lie in (1/2, 1]");
  }
  if (!(delta > 0.0) || delta >= 1.0) {
    throw ConfigError("delta must lie in (0, 1)");
  }
  if (measurement_budget && *measurement_budget < 1) {
    throw ConfigError("measurement_budget must be positive");
  }
  if (!(alpha > 0.0)) {
    throw ConfigError("alpha must be positive");
  }
  if (!(magnitude_floor > 0.0)) {
    throw ConfigError("magnitude_floor must be positive");
  }
  if (collision_threshold && !(*collision_threshold > 0.0)) {
    throw ConfigError("collision_threshold must be positive");
  }
  if (ra.preambles < 1 || ra.max_attempts < 1 || ra.backoff_slots < 1) {
    throw ConfigError("random access parameters must be positive");
  }
  if (aggregation_overhead < 0) {
    throw ConfigError("aggregation_overhead must be nonnegative");
  }
  if (omp_residual_tol && *omp_residual_tol < 0.0) {
    throw ConfigError("omp_residual_tol must be nonnegative");
  }
  if (omp_max_iterations && *omp_max_iterations < 1) {
    throw ConfigError("omp_max_iterations must be positive");
  }
  if (trials < 1) {
    throw ConfigError("trials must be positive");
  }
  if (schemes.empty()) {
    throw ConfigError("at least one scheme must be selected");
  }
  if (threads < 0) {
    throw ConfigError("threads must be nonnegative");
  }
  if (!sweep_var.empty()) {
    if (sweep_var != "M" && sweep_var != "K" && sweep_var != "snr_db") {
      throw ConfigError("sweep variable must be one of M, K, snr_db");
    }
    if (sweep_values.empty()) {
      throw ConfigError("sweep requires at least one value");
    }
    for (double v : sweep_values) {
      if (sweep_var == "M") {
        if (v < 1.0 || v != std::floor(v)) {
          throw ConfigError("M sweep values must be positive integers");
        }
      } else if (sweep_var == "K") {
        if (v < 1.0 || v != std::floor(v)) {
          throw ConfigError("K sweep values must be positive integers");
        }
        const long k = static_cast<long>(v);
        if (k % active_per_cluster != 0) {
          throw ConfigError("K sweep values must be multiples of active_per_cluster");
        }
        const long k_clusters = k / active_per_cluster;
        if (k_clusters > clusters) {
          throw ConfigError("K sweep value " + std::to_string(k) +
                            " needs more clusters than the model has");
        }
      }
    }
  } else if (!sweep_values.empty()) {
    throw ConfigError("sweep values given without a sweep variable");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + value + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    parts.push_back(trim(item));
  }
  return parts;
}

}  // namespace

std::vector<Scheme> parse_scheme_list(const std::string& csv) {
  std::vector<Scheme> schemes;
  for (const std::string& name : split(csv, ',')) {
    if (name.empty()) continue;
    const Scheme s = scheme_from_string(name);
    if (std::find(schemes.begin(), schemes.end(), s) == schemes.end()) {
      schemes.push_back(s);
    }
  }
  if (schemes.empty()) {
    throw ConfigError("scheme list '" + csv + "' is empty");
  }
  return schemes;
}

void apply_sweep_spec(ExperimentConfig& cfg, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("sweep spec must look like var=v1,v2,... got '" + spec + "'");
  }
  cfg.sweep_var = trim(spec.substr(0, eq));
  cfg.sweep_values.clear();
  for (const std::string& item : split(spec.substr(eq + 1), ',')) {
    if (item.empty()) continue;
    cfg.sweep_values.push_back(parse_double("sweep", item));
  }
}

void apply_config_key(ExperimentConfig& cfg, const std::string& raw_key,
                      const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "clusters") {
    cfg.clusters = parse_int(key, value);
  } else if (key == "cluster_size") {
    cfg.cluster_size = parse_int(key, value);
  } else if (key == "active_clusters") {
    cfg.active_clusters = parse_int(key, value);
  } else if (key == "active_per_cluster") {
    cfg.active_per_cluster = parse_int(key, value);
  } else if (key == "sizing") {
    if (value == "fixed") {
      cfg.sizing = InBlockSizing::fixed;
    } else if (value == "uniform") {
      cfg.sizing = InBlockSizing::uniform;
    } else {
      throw ConfigError("sizing must be 'fixed' or 'uniform'");
    }
  } else if (key == "rows_per_stage") {
    cfg.rows_per_stage = parse_int(key, value);
  } else if (key == "stages") {
    cfg.stages = parse_int(key, value);
  } else if (key == "theta") {
    cfg.theta = parse_double(key, value);
  } else if (key == "delta") {
    cfg.delta = parse_double(key, value);
  } else if (key == "measurement_budget") {
    cfg.measurement_budget = parse_int(key, value);
  } else if (key == "alpha") {
    cfg.alpha = parse_double(key, value);
  } else if (key == "snr_db") {
    if (value == "noiseless") {
      cfg.snr_db.reset();
    } else {
      cfg.snr_db = parse_double(key, value);
    }
  } else if (key == "magnitude_floor") {
    cfg.magnitude_floor = parse_double(key, value);
  } else if (key == "mode") {
    if (value == "full_duplex" || value == "full") {
      cfg.mode = DuplexMode::full_duplex;
    } else if (value == "half_duplex" || value == "half") {
      cfg.mode = DuplexMode::half_duplex;
    } else {
      throw ConfigError("mode must be 'full_duplex' or 'half_duplex'");
    }
  } else if (key == "collision_threshold") {
    cfg.collision_threshold = parse_double(key, value);
  } else if (key == "normalize_columns") {
    cfg.normalize_columns = parse_bool(key, value);
  } else if (key == "refine") {
    cfg.refine = parse_bool(key, value);
  } else if (key == "self_seed") {
    cfg.self_seed = parse_bool(key, value);
  } else if (key == "preambles") {
    cfg.ra.preambles = parse_int(key, value);
  } else if (key == "max_attempts") {
    cfg.ra.max_attempts = parse_int(key, value);
  } else if (key == "backoff_slots") {
    cfg.ra.backoff_slots = parse_int(key, value);
  } else if (key == "aggregation_overhead") {
    cfg.aggregation_overhead = parse_int(key, value);
  } else if (key == "omp_residual_tol") {
    cfg.omp_residual_tol = parse_double(key, value);
  } else if (key == "omp_max_iterations") {
    cfg.omp_max_iterations = parse_int(key, value);
  } else if (key == "trials") {
    cfg.trials = parse_int(key, value);
  } else if (key == "seed") {
    try {
      cfg.seed = std::stoull(value);
    } catch (const std::exception&) {
      throw ConfigError("key 'seed': expected an unsigned integer, got '" + value + "'");
    }
  } else if (key == "schemes") {
    cfg.schemes = parse_scheme_list(value);
  } else if (key == "sweep") {
    apply_sweep_spec(cfg, value);
  } else if (key == "threads") {
    cfg.threads = parse_int(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig load_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    try {
      apply_config_key(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  return load_config(in);
}

}  // namespace blocksketch
