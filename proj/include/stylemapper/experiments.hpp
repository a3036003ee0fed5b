#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylemapper/analysis.hpp"
#include "stylemapper/config.hpp"
#include "stylemapper/data.hpp"
#include "stylemapper/trainer.hpp"

namespace stylemapper {

inline constexpr const char* kVersion = "stylemapper 0.1.0";

// Everything needed to rebuild a run: data source, training, and evaluation protocol.
struct ExperimentConfig {
  std::string data_manifest;  // path<TAB>split list; phantoms are generated when empty
  std::size_t phantom_count = 104;
  std::size_t phantom_size = 64;
  std::uint64_t phantom_seed = 0;
  std::size_t n_validation = 16;
  std::size_t n_test = 24;
  std::uint64_t split_seed = 0;
  TrainConfig train;
  Family target_family = Family::PowerLaw;
  std::vector<std::size_t> n_target_sweep = {1, 2, 5, 10};
  bool exp_include_sobel = true;

  static ExperimentConfig parse(const KeyValueConfig& kv, const std::filesystem::path& base = {}) {
    ExperimentConfig c;
    c.apply(kv, base);
    kv.check_all_used();
    return c;
  }

  void apply(const KeyValueConfig& kv, const std::filesystem::path& base = {}) {
    kv.read("data_manifest", data_manifest);
    kv.read("phantom_count", phantom_count);
    kv.read("phantom_size", phantom_size);
    kv.read("phantom_seed", phantom_seed);
    kv.read("n_validation", n_validation);
    kv.read("n_test", n_test);
    kv.read("split_seed", split_seed);
    train.read(kv);
    if (kv.has("target_family")) {
      std::string name;
      kv.read("target_family", name);
      try {
        target_family = parse_family(name);
      } catch (const std::exception& e) {
        throw ConfigError("config key 'target_family': " + std::string(e.what()));
      }
    }
    if (kv.has("n_target_sweep")) {
      n_target_sweep.clear();
      for (const auto& s : kv.list("n_target_sweep")) {
        try {
          n_target_sweep.push_back(std::stoul(s));
        } catch (const std::exception&) {
          throw ConfigError("config key 'n_target_sweep': invalid value '" + s + "'");
        }
      }
    }
    kv.read("exp_include_sobel", exp_include_sobel);
    if (!data_manifest.empty()) {
      std::filesystem::path p(data_manifest);
      if (p.is_relative() && !base.empty()) p = base / p;
      if (!std::filesystem::exists(p)) throw ConfigError("config key 'data_manifest': no such file " + p.string());
      data_manifest = p.string();
    }
  }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    if (!data_manifest.empty()) os << "data_manifest = " << data_manifest << "\n";
    os << "phantom_count = " << phantom_count << "\nphantom_size = " << phantom_size << "\nphantom_seed = " << phantom_seed
       << "\nn_validation = " << n_validation << "\nn_test = " << n_test << "\nsplit_seed = " << split_seed << "\n";
    const auto& t = train;
    os << "lr = " << t.lr << "\nbeta1 = " << t.beta1 << "\nbeta2 = " << t.beta2 << "\nweight_decay = " << t.weight_decay
       << "\nmax_iters = " << t.max_iters << "\nlog_every = " << t.log_every << "\ncheckpoint_every = " << t.checkpoint_every
       << "\nvalidate_every = " << t.validate_every << "\npatience = " << t.patience << "\nlambda_recon = " << t.weights.recon
       << "\nlambda_same_s = " << t.weights.same_s << "\nlambda_same_c = " << t.weights.same_c
       << "\nlambda_cross = " << t.weights.cross << "\nexcluded_families = ";
    for (std::size_t i = 0; i < t.excluded_families.size(); ++i) os << (i ? "," : "") << family_name(t.excluded_families[i]);
    os << "\nfixed_style_ablation = " << (t.fixed_style_ablation ? "true" : "false") << "\nseed = " << t.seed
       << "\nimage_size = " << t.image_size << "\nwidth = " << t.model.width << "\nn_res = " << t.model.n_res
       << "\nn_style_down = " << t.model.n_style_down << "\nmlp_hidden = " << t.model.mlp_hidden
       << "\nup_kernel = " << t.model.up_kernel << "\ntarget_family = " << family_name(target_family) << "\nn_target_sweep = ";
    for (std::size_t i = 0; i < n_target_sweep.size(); ++i) os << (i ? "," : "") << n_target_sweep[i];
    os << "\nexp_include_sobel = " << (exp_include_sobel ? "true" : "false") << "\n";
    return os.str();
  }
};

// CPU-sized preset used by `reproduce --desk-scale` and the acceptance suite.
inline ExperimentConfig desk_scale_config() {
  ExperimentConfig c;
  c.phantom_count = 104;
  c.phantom_size = 64;
  c.n_validation = 16;
  c.n_test = 24;
  c.train.image_size = 64;
  c.train.max_iters = 2000;
  c.train.lr = 1e-3;
  c.train.model.width = 16;
  c.train.model.n_res = 4;
  c.train.model.mlp_hidden = 64;
  c.train.model.up_kernel = 3;
  c.train.excluded_families = {Family::PowerLaw};
  c.train.seed = 1;
  return c;
}

inline Dataset load_dataset(const ExperimentConfig& c) {
  if (c.data_manifest.empty()) {
    if (c.n_validation + c.n_test >= c.phantom_count) throw std::invalid_argument("phantom_count too small for the splits");
    const auto images = generate_phantoms(c.phantom_seed, c.phantom_count, c.phantom_size);
    const double n = static_cast<double>(c.phantom_count);
    const SplitRatios ratios{1.0 - (static_cast<double>(c.n_validation) + static_cast<double>(c.n_test)) / n,
                             static_cast<double>(c.n_validation) / n, static_cast<double>(c.n_test) / n};
    return split_dataset(images, ratios, c.split_seed);
  }
  const auto entries = read_manifest(c.data_manifest);
  const auto dir = std::filesystem::path(c.data_manifest).parent_path();
  std::vector<Image> raw;
  for (const auto& e : entries) {
    std::filesystem::path p(e.path);
    if (p.is_relative()) p = dir / p;
    raw.push_back(io::read_image(p.string()));
  }
  const auto images = preprocess_corpus(raw);
  Dataset ds;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].split == "train") {
      ds.train.push_back(images[i]);
      ds.train_ids.push_back(i);
    } else if (entries[i].split == "validation") {
      ds.validation.push_back(images[i]);
      ds.validation_ids.push_back(i);
    } else {
      ds.test.push_back(images[i]);
      ds.test_ids.push_back(i);
    }
  }
  if (ds.train.empty() || ds.test.empty()) throw std::invalid_argument("manifest needs train and test images");
  return ds;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string run_dir_name(const std::string& experiment, const ExperimentConfig& c) {
  std::ostringstream os;
  os << experiment << "-" << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(experiment + "\n" + c.to_string())
     << std::dec << "-s" << c.train.seed;
  return os.str();
}

// Writes manifest.txt: the full resolved config plus version and command, enough to re-run.
inline void write_run_manifest(const std::filesystem::path& dir, const std::string& command, const ExperimentConfig& c) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.txt");
  if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.txt").string());
  out << "# " << kVersion << "\n# command: " << command << "\n" << c.to_string();
}

inline std::vector<std::size_t> usable_sweep(const std::vector<std::size_t>& sweep, std::size_t donors) {
  std::vector<std::size_t> out;
  for (auto n : sweep) {
    if (n == 0 || n > donors) throw std::invalid_argument("n_target " + std::to_string(n) + " exceeds donor count " + std::to_string(donors));
    out.push_back(n);
  }
  return out;
}

struct SweepRow {
  std::string target;
  std::size_t n_target = 0;
  double normalized_mae = 0;
};

template <StyleTransferModel M>
std::vector<SweepRow> n_target_sweep(const M& model, const std::vector<Image>& test_split, const TransformSpec& target,
                                     const std::vector<std::size_t>& sweep) {
  const auto [donors, eval] = donor_test_split(test_split);
  std::vector<SweepRow> rows;
  for (auto n : usable_sweep(sweep, donors.size())) {
    rows.push_back({std::string(family_name(target.family)), n, evaluate_transfer(model, eval, target, n, donors).normalized_mae});
  }
  return rows;
}

inline void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "target_style,n_target,normalized_mae\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", r.normalized_mae);
    out << r.target << "," << r.n_target << "," << buf << "\n";
  }
}

// Training run whose log and checkpoints live under `dir`.
inline TrainResult train_in_dir(const Dataset& ds, const TrainConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream log(dir / "train_log.csv");
  if (!log) throw std::runtime_error("cannot write training log in " + dir.string());
  TrainHooks hooks;
  hooks.log_csv = &log;
  hooks.checkpoint_dir = (dir / "checkpoints").string();
  return train(ds.train, ds.validation, cfg, hooks);
}

inline void write_codes_csv(const std::filesystem::path& path, const std::vector<StyleCode>& codes,
                            const std::vector<std::string>& labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "label";
  for (std::size_t i = 0; i < kStyleDim; ++i) out << ",s" << i;
  out << "\n";
  for (std::size_t k = 0; k < codes.size(); ++k) {
    out << labels.at(k);
    for (double v : codes[k]) {
      char buf[40];
      std::snprintf(buf, sizeof buf, ",%.9g", v);
      out << buf;
    }
    out << "\n";
  }
}

// Reads a codes CSV; when `label_override` is non-empty every row gets that label.
inline std::pair<std::vector<StyleCode>, std::vector<std::string>> read_codes_csv(const std::string& path,
                                                                                const std::string& label_override = "") {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open codes file " + path);
  std::string line;
  std::getline(in, line);
  std::vector<StyleCode> codes;
  std::vector<std::string> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string label, cell;
    std::getline(ls, label, ',');
    StyleCode c{};
    for (std::size_t i = 0; i < kStyleDim; ++i) {
      if (!std::getline(ls, cell, ',')) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 8 code values");
      c[i] = std::stod(cell);
    }
    codes.push_back(c);
    labels.push_back(label_override.empty() ? label : label_override);
  }
  return {codes, labels};
}

inline void write_embedding_csv(const std::filesystem::path& path, const Embedding2D& e) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "label,x,y\n";
  for (std::size_t i = 0; i < e.points.size(); ++i) {
    char buf[80];
    std::snprintf(buf, sizeof buf, ",%.9g,%.9g", e.points[i].x, e.points[i].y);
    out << e.labels[i] << buf << "\n";
  }
}

inline void write_similarity_csv(const std::filesystem::path& path, const SimilarityMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "style";
  for (const auto& l : m.labels) out << "," << l;
  out << "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << m.labels[i];
    for (std::size_t j = 0; j < m.size(); ++j) {
      char buf[40];
      std::snprintf(buf, sizeof buf, ",%.6f", m(i, j));
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace stylemapper
