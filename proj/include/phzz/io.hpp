#pragma once

// File formats: trait CSV (first column `taxon`, NA for missing), JSON
// config mirroring ModelConfig with unknown keys rejected, streaming chain
// CSV with 17-significant-digit floats, and summary JSON.

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "phzz/gibbs.hpp"
#include "phzz/posterior.hpp"
#include "phzz/traits.hpp"

namespace phzz {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Column typing, keyed by trait CSV header name. Columns absent from the
// map are continuous; categorical columns carry their ordered class list.
struct TraitTyping {
  std::map<std::string, Trait> columns;
};

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline ModelConfig parse_config(const nlohmann::json& j, TraitTyping* typing) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ModelConfig cfg;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "lkj_eta") cfg.lkj_eta = val.get<double>();
      else if (key == "d_log_location") cfg.d_log_location = val.get<double>();
      else if (key == "d_log_scale") cfg.d_log_scale = val.get<double>();
      else if (key == "root_sample_size")
        cfg.root_sample_size = val.get<double>();
      else if (key == "root_mean")
        cfg.root_mean = val.get<std::vector<double>>();
      else if (key == "fix_discrete_d") cfg.fix_discrete_d = val.get<bool>();
      else if (key == "eps_init") cfg.eps_init = val.get<double>();
      else if (key == "lstep") cfg.lstep = val.get<int>();
      else if (key == "lambda_ref") cfg.lambda_ref = val.get<double>();
      else if (key == "seed") cfg.seed = val.get<std::uint64_t>();
      else if (key == "chains") cfg.chains = val.get<int>();
      else if (key == "iterations") cfg.iterations = val.get<long>();
      else if (key == "burnin") cfg.burnin = val.get<long>();
      else if (key == "thinning") cfg.thinning = val.get<int>();
      else if (key == "target_accept") cfg.target_accept = val.get<double>();
      else if (key == "max_depth") cfg.max_depth = val.get<int>();
      else if (key == "rs_init") cfg.rs_init = val.get<double>();
      else if (key == "mode") cfg.mode = val.get<std::string>();
      else if (key == "latent_sampler")
        cfg.latent_sampler = val.get<std::string>();
      else if (key == "joint_kernel") cfg.joint_kernel = val.get<std::string>();
      else if (key == "save_latents") cfg.save_latents = val.get<bool>();
      else if (key == "traits") {
        if (!typing) throw ConfigError("traits section not accepted here");
        if (!val.is_object()) throw ConfigError("traits must be an object");
        for (const auto& [col, tj] : val.items()) {
          std::string kind = tj.at("kind").get<std::string>();
          if (kind == "continuous")
            typing->columns[col] = TraitSpec::continuous(col);
          else if (kind == "binary")
            typing->columns[col] = TraitSpec::binary(col);
          else if (kind == "categorical")
            typing->columns[col] = TraitSpec::categorical(
                col, tj.at("classes").get<std::vector<std::string>>());
          else
            throw ConfigError("unknown trait kind: " + kind);
        }
      } else {
        throw ConfigError("unknown config key: " + key);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  if (cfg.lkj_eta <= 0.0 || cfg.d_log_scale <= 0.0 ||
      cfg.root_sample_size <= 0.0 || cfg.eps_init <= 0.0 ||
      cfg.lambda_ref < 0.0 || cfg.target_accept <= 0.0 ||
      cfg.target_accept >= 1.0)
    throw ConfigError("config value out of range");
  if (cfg.chains < 1 || cfg.iterations < 1 || cfg.burnin < 0 ||
      cfg.thinning < 1 || cfg.max_depth < 1 || cfg.lstep < 1 ||
      cfg.rs_init <= 0.0)
    throw ConfigError("config value out of range");
  if (cfg.mode != "joint" && cfg.mode != "alternate")
    throw ConfigError("mode must be joint or alternate");
  if (cfg.latent_sampler != "zigzag" && cfg.latent_sampler != "bps")
    throw ConfigError("latent_sampler must be zigzag or bps");
  if (cfg.joint_kernel != "lg-nuts" && cfg.joint_kernel != "lg-hmc")
    throw ConfigError("joint_kernel must be lg-nuts or lg-hmc");
  return cfg;
}

inline ModelConfig load_config(const std::string& path, TraitTyping* typing) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j, typing);
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    std::size_t a = field.find_first_not_of(" \t\r");
    std::size_t b = field.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}
}  // namespace detail

struct TraitTable {
  TraitSpec spec;  // column order of the CSV
  std::vector<std::string> taxa;
  std::vector<TraitRow> rows;
};

inline TraitTable read_traits_csv(const std::string& path,
                                  const TraitTyping& typing) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trait file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty trait file");
  std::vector<std::string> header = detail::split_csv_line(line);
  if (header.empty() || header[0] != "taxon")
    throw DataError("first trait column must be `taxon`");
  TraitTable tab;
  for (std::size_t c = 1; c < header.size(); ++c) {
    auto it = typing.columns.find(header[c]);
    tab.spec.traits.push_back(it != typing.columns.end()
                                  ? it->second
                                  : TraitSpec::continuous(header[c]));
  }
  if (tab.spec.traits.empty()) throw DataError("no trait columns");
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = detail::split_csv_line(line);
    if (f.size() != header.size())
      throw DataError("line " + std::to_string(lineno) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(f.size()));
    tab.taxa.push_back(f[0]);
    TraitRow row;
    for (std::size_t c = 1; c < f.size(); ++c) {
      const Trait& tr = tab.spec.traits[c - 1];
      const std::string& s = f[c];
      if (s == "NA") {
        row.push_back(TraitValue::na());
        continue;
      }
      switch (tr.kind) {
        case TraitKind::Continuous: {
          std::size_t pos = 0;
          double v;
          try {
            v = std::stod(s, &pos);
          } catch (const std::exception&) {
            throw DataError("line " + std::to_string(lineno) + ", column " +
                            tr.name + ": not a number: " + s);
          }
          if (pos != s.size())
            throw DataError("line " + std::to_string(lineno) + ", column " +
                            tr.name + ": not a number: " + s);
          row.push_back(TraitValue::cont(v));
          break;
        }
        case TraitKind::Binary: {
          if (s == "0") row.push_back(TraitValue::bin(-1));
          else if (s == "1") row.push_back(TraitValue::bin(+1));
          else
            throw DataError("line " + std::to_string(lineno) + ", column " +
                            tr.name + ": binary value must be 0, 1, or NA");
          break;
        }
        case TraitKind::Categorical: {
          int k = -1;
          for (std::size_t m = 0; m < tr.classes.size(); ++m)
            if (tr.classes[m] == s) k = static_cast<int>(m);
          if (k < 0)
            throw DataError("line " + std::to_string(lineno) + ", column " +
                            tr.name + ": unknown class: " + s);
          row.push_back(TraitValue::cat(k));
          break;
        }
      }
    }
    tab.rows.push_back(std::move(row));
  }
  if (tab.rows.empty()) throw DataError("trait file has no data rows");
  for (std::size_t i = 0; i < tab.taxa.size(); ++i)
    for (std::size_t j = i + 1; j < tab.taxa.size(); ++j)
      if (tab.taxa[i] == tab.taxa[j])
        throw DataError("duplicate taxon in trait file: " + tab.taxa[i]);
  return tab;
}

// Reorders trait rows to the tree's tip order; every tip must have a row
// and vice versa.
inline std::vector<TraitRow> align_to_tree(const TraitTable& tab,
                                           const Phylogeny& tree) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < tab.taxa.size(); ++i) index[tab.taxa[i]] = i;
  std::vector<TraitRow> out;
  for (int tip = 0; tip < tree.n_tips; ++tip) {
    const std::string& label = tree.nodes[tip].label;
    auto it = index.find(label);
    if (it == index.end())
      throw DataError("tree tip has no trait row: " + label);
    out.push_back(tab.rows[it->second]);
    index.erase(it);
  }
  if (!index.empty())
    throw DataError("trait row has no tree tip: " + index.begin()->first);
  return out;
}

// Column names for the chain CSV, fixed per run.
inline std::vector<std::string> chain_columns(const PosteriorModel& model) {
  std::vector<std::string> cols = {"iteration"};
  int q = model.q();
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j)
      cols.push_back("R." + std::to_string(i + 1) + "." + std::to_string(j + 1));
  for (int i = 0; i < q; ++i)
    if (!model.d_fixed()[i]) cols.push_back("D." + std::to_string(i + 1));
  cols.push_back("lp");
  cols.push_back("accept");
  cols.push_back("seconds");
  if (model.config().save_latents)
    for (int a = 0; a < model.n_taxa(); ++a)
      for (int b = 0; b < model.q(); ++b)
        cols.push_back("X." + std::to_string(a + 1) + "." +
                       std::to_string(b + 1));
  return cols;
}

class ChainWriter {
 public:
  ChainWriter(const std::string& path, const PosteriorModel& model)
      : out_(path) {
    if (!out_) throw DataError("cannot open chain output: " + path);
    std::vector<std::string> cols = chain_columns(model);
    for (std::size_t i = 0; i < cols.size(); ++i)
      out_ << (i ? "," : "") << cols[i];
    out_ << "\n";
  }

  void write(const ChainRecord& rec) {
    out_ << rec.iteration;
    for (Eigen::Index i = 0; i < rec.r_upper.size(); ++i)
      out_ << "," << fmt17(rec.r_upper[i]);
    for (Eigen::Index i = 0; i < rec.d_free.size(); ++i)
      out_ << "," << fmt17(rec.d_free[i]);
    out_ << "," << fmt17(rec.log_density) << "," << fmt17(rec.accept_stat)
         << "," << fmt17(rec.seconds);
    for (Eigen::Index i = 0; i < rec.x.size(); ++i)
      out_ << "," << fmt17(rec.x[i]);
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

struct ChainFile {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> data;  // data[col][draw]
};

inline ChainFile read_chain_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open chain file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty chain file: " + path);
  ChainFile cf;
  cf.columns = detail::split_csv_line(line);
  cf.data.resize(cf.columns.size());
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = detail::split_csv_line(line);
    if (f.size() != cf.columns.size())
      throw DataError(path + " line " + std::to_string(lineno) +
                      ": ragged row");
    for (std::size_t c = 0; c < f.size(); ++c) {
      try {
        cf.data[c].push_back(std::stod(f[c]));
      } catch (const std::exception&) {
        throw DataError(path + " line " + std::to_string(lineno) +
                        ": bad number: " + f[c]);
      }
    }
  }
  return cf;
}

// In-memory equivalent of writing records and reading them back.
inline ChainFile records_to_chainfile(const PosteriorModel& model,
                                      const std::vector<ChainRecord>& recs) {
  ChainFile cf;
  cf.columns = chain_columns(model);
  cf.data.resize(cf.columns.size());
  for (const auto& rec : recs) {
    std::size_t c = 0;
    cf.data[c++].push_back(double(rec.iteration));
    for (Eigen::Index i = 0; i < rec.r_upper.size(); ++i)
      cf.data[c++].push_back(rec.r_upper[i]);
    for (Eigen::Index i = 0; i < rec.d_free.size(); ++i)
      cf.data[c++].push_back(rec.d_free[i]);
    cf.data[c++].push_back(rec.log_density);
    cf.data[c++].push_back(rec.accept_stat);
    cf.data[c++].push_back(rec.seconds);
    for (Eigen::Index i = 0; i < rec.x.size(); ++i)
      cf.data[c++].push_back(rec.x[i]);
    if (c != cf.columns.size())
      throw DataError("chain record does not match the column schema");
  }
  return cf;
}

inline void write_error_json(std::ostream& os, const std::string& kind,
                             const std::string& message) {
  nlohmann::json j{{"error", kind}, {"message", message}};
  os << j.dump() << "\n";
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace phzz
