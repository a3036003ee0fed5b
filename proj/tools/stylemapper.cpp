#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "stylemapper/experiments.hpp"

namespace fs = std::filesystem;
using namespace stylemapper;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

Family family_arg(const std::string& name) {
  try {
    return parse_family(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

TransformSpec target_spec(Family f) { return f == Family::Exp ? TransformSpec::exp(2.3, 0.02) : fixed_transform(f); }

ExperimentConfig load_config(const std::string& path, bool desk_scale) {
  ExperimentConfig c = desk_scale ? desk_scale_config() : ExperimentConfig{};
  if (!path.empty()) {
    const auto kv = KeyValueConfig::load(path);
    c.apply(kv, fs::path(path).parent_path());
    kv.check_all_used();
  }
  return c;
}

std::vector<std::string> image_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (ext == ".pgm" || ext == ".png") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

StyleMapper<float> load_model(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("missing checkpoint " + path);
  return StyleMapper<float>::load(path);
}

void save_image(const fs::path& p, const Image& img) { io::write_pgm(p.string(), img); }

void print_sweep(const std::vector<SweepRow>& rows) {
  for (const auto& r : rows) std::cout << r.target << " n_target=" << r.n_target << " normalized_mae=" << r.normalized_mae << "\n";
}

fs::path prepare_run(const fs::path& out, const std::string& name, const ExperimentConfig& c, const std::string& command) {
  const auto dir = out / run_dir_name(name, c);
  write_run_manifest(dir, command, c);
  std::cout << "run directory: " << dir.string() << "\n";
  return dir;
}

// ---- subcommands ----

int cmd_train(const std::string& config, bool desk, const fs::path& out) {
  const auto c = load_config(config, desk);
  const auto dir = prepare_run(out, "train", c, "train");
  const auto ds = load_dataset(c);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = train_in_dir(ds, c.train, dir);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "steps " << r.steps_run << (r.stopped_early ? " (early stop)" : "") << ", final loss "
            << (r.log.empty() ? 0.0 : r.log.back().loss.total) << ", " << secs << " s\n";
  return 0;
}

struct TransformArgs {
  std::string family, input, output;
  bool fixed = false;
  std::optional<std::uint64_t> seed;
  std::optional<double> slope, intercept, scale, gamma, r1, r2, s1, s2, a, b;
};

int cmd_transform(const TransformArgs& t) {
  const Family f = family_arg(t.family);
  if (t.fixed == t.seed.has_value()) throw UsageError("pass exactly one of --fixed or --seed");
  TransformSpec spec;
  if (f == Family::Exp) {
    spec = TransformSpec::exp(2.3, 0.02);
  } else if (t.fixed) {
    spec = fixed_transform(f);
  } else {
    std::mt19937_64 rng(*t.seed);
    spec = sample_transform(f, rng);
  }
  std::visit(
      [&](auto& p) {
        using P = std::decay_t<decltype(p)>;
        auto over = [](const std::optional<double>& o, double& field) {
          if (o) field = *o;
        };
        if constexpr (std::is_same_v<P, params::Linear> || std::is_same_v<P, params::Negative>) {
          over(t.slope, p.slope);
          over(t.intercept, p.intercept);
        } else if constexpr (std::is_same_v<P, params::Log>) {
          over(t.scale, p.scale);
        } else if constexpr (std::is_same_v<P, params::PowerLaw>) {
          over(t.gamma, p.gamma);
        } else if constexpr (std::is_same_v<P, params::PiecewiseLinear>) {
          over(t.r1, p.r1);
          over(t.r2, p.r2);
          over(t.s1, p.s1);
          over(t.s2, p.s2);
        } else if constexpr (std::is_same_v<P, params::Exp>) {
          over(t.a, p.a);
          over(t.b, p.b);
        }
      },
      spec.params);
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto img = io::read_image(t.input);
  save_image(t.output, apply_transform(spec, img));
  std::ofstream side(t.output + ".spec.txt");
  side << spec.to_string() << "\n";
  std::cout << spec.to_string() << "\n";
  return 0;
}

struct TransferArgs {
  std::string checkpoint, style_image, style_dir, input, output;
  std::size_t n_target = 1;
};

int cmd_transfer(const TransferArgs& t) {
  if (t.style_image.empty() == t.style_dir.empty()) throw UsageError("pass exactly one of --style-image or --style-dir");
  const auto model = load_model(t.checkpoint);
  std::vector<StyleCode> codes;
  if (!t.style_image.empty()) {
    codes.push_back(encode_style(model, io::read_image(t.style_image)));
  } else {
    const auto files = image_files(t.style_dir);
    if (t.n_target == 0 || t.n_target > files.size()) {
      throw UsageError("--n-target " + std::to_string(t.n_target) + " exceeds the " + std::to_string(files.size()) +
                       " images in " + t.style_dir);
    }
    for (std::size_t k = 0; k < t.n_target; ++k) codes.push_back(encode_style(model, io::read_image(files[k])));
  }
  const auto code = most_representative_code(codes);
  save_image(t.output, transfer(model, io::read_image(t.input), code));
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config, bool desk, const std::vector<std::string>& targets,
             const std::vector<std::size_t>& sweep, const std::string& out_csv) {
  auto c = load_config(config, desk);
  if (!sweep.empty()) c.n_target_sweep = sweep;
  const auto model = load_model(checkpoint);
  const auto ds = load_dataset(c);
  std::vector<SweepRow> rows;
  std::vector<Family> fams;
  for (const auto& t : targets) fams.push_back(family_arg(t));
  if (fams.empty()) fams.push_back(c.target_family);
  for (auto f : fams) {
    const auto r = n_target_sweep(model, ds.test, target_spec(f), c.n_target_sweep);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  write_sweep_csv(out_csv, rows);
  print_sweep(rows);
  return 0;
}

int cmd_codes(const std::string& checkpoint, const std::string& input_dir, const std::string& config, bool desk,
              const std::string& style, const std::string& label, const std::string& out_csv) {
  const auto model = load_model(checkpoint);
  std::vector<Image> imgs;
  if (!input_dir.empty()) {
    for (const auto& f : image_files(input_dir)) imgs.push_back(io::read_image(f));
  } else {
    imgs = load_dataset(load_config(config, desk)).test;
  }
  if (imgs.empty()) throw UsageError("no input images");
  if (!style.empty()) imgs = apply_transform_all(parse_transform_spec(style), imgs);
  const auto codes = encode_styles(model, imgs);
  write_codes_csv(out_csv, codes, std::vector<std::string>(codes.size(), label.empty() ? (style.empty() ? "input" : style) : label));
  std::cout << codes.size() << " codes written to " << out_csv << "\n";
  return 0;
}

int cmd_discriminate(const std::string& a, const std::string& b, const fs::path& out) {
  auto [ca, la] = read_codes_csv(a);
  auto [cb, lb] = read_codes_csv(b);
  if (!la.empty() && !lb.empty() && la[0] == lb[0]) {
    // Same label in both files: fall back to file stems so the classes stay distinct.
    std::fill(la.begin(), la.end(), fs::path(a).stem().string());
    std::fill(lb.begin(), lb.end(), fs::path(b).stem().string());
  }
  ca.insert(ca.end(), cb.begin(), cb.end());
  la.insert(la.end(), lb.begin(), lb.end());
  const auto emb = pca_2d(ca, la);
  const auto svc = svc_discriminate(emb);
  fs::create_directories(out);
  write_embedding_csv(out / "embedding.csv", emb);
  save_image(out / "decision_boundary.pgm", decision_raster(svc.model));
  std::cout << "accuracy " << svc.accuracy << "\n";
  return 0;
}

// ---- reproduce ----

int reproduce_oneshot(ExperimentConfig c, const fs::path& out, const std::string& name, Family target) {
  c.target_family = target;
  if (target == Family::Exp) {
    c.train.excluded_families.clear();
    if (!c.exp_include_sobel) c.train.excluded_families = {Family::SobelX, Family::SobelY};
  } else {
    c.train.excluded_families = {target};
  }
  const auto dir = prepare_run(out, name, c, "reproduce " + name);
  const auto ds = load_dataset(c);
  const auto r = train_in_dir(ds, c.train, dir);
  const auto spec = target_spec(target);
  const auto rows = n_target_sweep(r.model, ds.test, spec, c.n_target_sweep);
  write_sweep_csv(dir / "n_target_sweep.csv", rows);
  const auto [donors, eval] = donor_test_split(ds.test);
  const auto code = encode_style(r.model, apply_transform(spec, donors[0]));
  save_image(dir / "input.pgm", eval[0]);
  save_image(dir / "target.pgm", apply_transform(spec, eval[0]));
  save_image(dir / "transferred.pgm", transfer(r.model, eval[0], code));
  print_sweep(rows);
  return 0;
}

int reproduce_ablation(ExperimentConfig c, const fs::path& out, Family target) {
  c.target_family = target;
  c.train.excluded_families = {target};
  const auto dir = prepare_run(out, "ablation-fixed", c, "reproduce ablation-fixed");
  const auto ds = load_dataset(c);
  const auto spec = target_spec(target);
  const auto [donors, eval] = donor_test_split(ds.test);
  std::ofstream csv(dir / "ablation.csv");
  csv << "training,target_style,normalized_mae\n";
  for (bool fixed : {false, true}) {
    auto tc = c.train;
    tc.fixed_style_ablation = fixed;
    const auto r = train_in_dir(ds, tc, dir / (fixed ? "fixed" : "random"));
    const double m = evaluate_transfer(r.model, eval, spec, 1, donors).normalized_mae;
    csv << (fixed ? "fixed" : "random") << "," << family_name(target) << "," << m << "\n";
    std::cout << (fixed ? "fixed-style" : "random-style") << " training: normalized_mae=" << m << "\n";
  }
  return 0;
}

// Two simulated scanners whose styles differ by a power-law contrast curve.
int reproduce_scanner(ExperimentConfig c, const fs::path& out) {
  c.train.excluded_families.clear();
  const auto dir = prepare_run(out, "scanner", c, "reproduce scanner");
  const auto ds = load_dataset(c);
  const auto r = train_in_dir(ds, c.train, dir);
  const auto scanner_a = TransformSpec::power_law(0.8), scanner_b = TransformSpec::power_law(1.25);
  const auto imgs_a = apply_transform_all(scanner_a, ds.test), imgs_b = apply_transform_all(scanner_b, ds.test);
  auto codes = encode_styles(r.model, imgs_a);
  const auto codes_b = encode_styles(r.model, imgs_b);
  write_codes_csv(dir / "codes_scanner_a.csv", codes, std::vector<std::string>(codes.size(), "scanner_a"));
  write_codes_csv(dir / "codes_scanner_b.csv", codes_b, std::vector<std::string>(codes_b.size(), "scanner_b"));
  std::vector<std::string> labels(codes.size(), "scanner_a");
  labels.resize(codes.size() + codes_b.size(), "scanner_b");
  codes.insert(codes.end(), codes_b.begin(), codes_b.end());
  const auto emb = pca_2d(codes, labels);
  const auto svc = svc_discriminate(emb);
  write_embedding_csv(dir / "embedding.csv", emb);
  save_image(dir / "decision_boundary.pgm", decision_raster(svc.model));

  // One-shot A -> B transfer.
  const auto [donors, eval] = donor_test_split(ds.test);
  const auto code_b = encode_style(r.model, apply_transform(scanner_b, donors[0]));
  double tr = 0, id = 0;
  for (const auto& x : eval) {
    const auto a = apply_transform(scanner_a, x), b = apply_transform(scanner_b, x);
    tr += mean_abs_error(transfer(r.model, a, code_b), b);
    id += mean_abs_error(a, b);
  }
  std::ofstream res(dir / "scanner.csv");
  res << "svc_accuracy,transfer_normalized_mae\n" << svc.accuracy << "," << tr / id << "\n";
  std::cout << "svc accuracy " << svc.accuracy << ", a->b normalized_mae " << tr / id << "\n";
  return 0;
}

int reproduce_similarity(ExperimentConfig c, const fs::path& out) {
  c.train.excluded_families.clear();
  const auto dir = prepare_run(out, "similarity", c, "reproduce similarity");
  const auto ds = load_dataset(c);
  const auto r = train_in_dir(ds, c.train, dir);
  std::vector<TransformSpec> specs;
  for (auto f : kTrainingFamilies) specs.push_back(fixed_transform(f));
  write_similarity_csv(dir / "similarity_matrix.csv", cross_style_matrix(r.model, ds.test, specs));
  std::ofstream csv(dir / "same_style.csv");
  csv << "style,mean,stddev\n";
  for (const auto& s : specs) {
    const auto st = same_style_stats(r.model, ds.test, s);
    const std::string name = s.family == Family::Linear ? "identity" : std::string(family_name(s.family));
    csv << name << "," << st.mean << "," << st.stddev << "\n";
    std::cout << name << ": " << st.mean << " +- " << st.stddev << "\n";
  }
  return 0;
}

int cmd_reproduce(const std::string& name, const std::string& config, bool desk, const fs::path& out,
                  const std::string& target, std::optional<std::uint64_t> seed) {
  auto c = load_config(config, desk);
  if (seed) c.train.seed = *seed;
  const auto pick = [&](Family dflt) { return target.empty() ? dflt : family_arg(target); };
  if (name == "oneshot-log") return reproduce_oneshot(c, out, name, Family::Log);
  if (name == "oneshot-gamma") return reproduce_oneshot(c, out, name, Family::PowerLaw);
  if (name == "oneshot-exp") return reproduce_oneshot(c, out, name, Family::Exp);
  if (name == "ablation-fixed") return reproduce_ablation(c, out, pick(Family::Log));
  if (name == "scanner" || name == "discriminate") return reproduce_scanner(c, out);
  if (name == "similarity") return reproduce_similarity(c, out);
  throw UsageError("unknown experiment '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"StyleMapper style transfer for grayscale images"};
  app.require_subcommand(1);

  std::string config, out = "runs", checkpoint;
  bool desk = false;

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config, "key=value config file")->check(CLI::ExistingFile);
  train->add_flag("--desk-scale", desk, "start from the CPU-sized preset");
  train->add_option("--out", out, "output directory");

  TransformArgs targs;
  auto* transform = app.add_subcommand("transform", "apply an intensity transform to an image");
  transform->add_option("--family", targs.family)->required();
  transform->add_flag("--fixed", targs.fixed, "use the fixed parameters of the family");
  transform->add_option("--seed", targs.seed, "sample random parameters with this seed");
  transform->add_option("--slope", targs.slope);
  transform->add_option("--intercept", targs.intercept);
  transform->add_option("--scale", targs.scale);
  transform->add_option("--gamma", targs.gamma);
  transform->add_option("--r1", targs.r1);
  transform->add_option("--r2", targs.r2);
  transform->add_option("--s1", targs.s1);
  transform->add_option("--s2", targs.s2);
  transform->add_option("--a", targs.a);
  transform->add_option("--b", targs.b);
  transform->add_option("--input", targs.input)->required()->check(CLI::ExistingFile);
  transform->add_option("--output", targs.output)->required();

  TransferArgs xargs;
  auto* transfer_cmd = app.add_subcommand("transfer", "transfer an image to a target style");
  transfer_cmd->add_option("--checkpoint", xargs.checkpoint)->required();
  transfer_cmd->add_option("--style-image", xargs.style_image)->check(CLI::ExistingFile);
  transfer_cmd->add_option("--style-dir", xargs.style_dir);
  transfer_cmd->add_option("--n-target", xargs.n_target);
  transfer_cmd->add_option("--input", xargs.input)->required()->check(CLI::ExistingFile);
  transfer_cmd->add_option("--output", xargs.output)->required();

  std::vector<std::string> eval_targets;
  std::vector<std::size_t> eval_sweep;
  std::string eval_out = "eval.csv";
  auto* eval = app.add_subcommand("eval", "normalized MAE over an n_target sweep");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--config", config)->check(CLI::ExistingFile);
  eval->add_flag("--desk-scale", desk);
  eval->add_option("--target", eval_targets, "target family (repeatable)");
  eval->add_option("--n-target", eval_sweep, "n_target values");
  eval->add_option("--output", eval_out);

  std::string input_dir, style, label, codes_out = "codes.csv";
  auto* codes = app.add_subcommand("codes", "write style codes as CSV");
  codes->add_option("--checkpoint", checkpoint)->required();
  codes->add_option("--input-dir", input_dir);
  codes->add_option("--config", config)->check(CLI::ExistingFile);
  codes->add_flag("--desk-scale", desk);
  codes->add_option("--style", style, "transform spec applied first, e.g. \"powerlaw gamma=0.5\"");
  codes->add_option("--label", label);
  codes->add_option("--output", codes_out);

  std::string codes_a, codes_b;
  auto* disc = app.add_subcommand("discriminate", "PCA embedding and RBF SVC over two code sets");
  disc->add_option("codes_a", codes_a)->required()->check(CLI::ExistingFile);
  disc->add_option("codes_b", codes_b)->required()->check(CLI::ExistingFile);
  disc->add_option("--out", out);

  std::string experiment, target;
  std::optional<std::uint64_t> seed;
  auto* repro = app.add_subcommand("reproduce", "run a named experiment end to end");
  repro->add_option("experiment", experiment,
                    "oneshot-log | oneshot-gamma | oneshot-exp | ablation-fixed | scanner | similarity")
      ->required();
  repro->add_option("--config", config)->check(CLI::ExistingFile);
  repro->add_flag("--desk-scale", desk);
  repro->add_option("--out", out);
  repro->add_option("--target", target, "held-out target family");
  repro->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(config, desk, out);
    if (*transform) return cmd_transform(targs);
    if (*transfer_cmd) return cmd_transfer(xargs);
    if (*eval) return cmd_eval(checkpoint, config, desk, eval_targets, eval_sweep, eval_out);
    if (*codes) {
      if (input_dir.empty() && config.empty() && !desk) throw UsageError("pass --input-dir, --config or --desk-scale");
      return cmd_codes(checkpoint, input_dir, config, desk, style, label, codes_out);
    }
    if (*disc) return cmd_discriminate(codes_a, codes_b, out);
    if (*repro) return cmd_reproduce(experiment, config, desk, out, target, seed);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
