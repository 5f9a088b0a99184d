#ifndef IQALS_PIPELINE_HPP
#define IQALS_PIPELINE_HPP

// The prep -> train -> eval -> report workflow over an output directory:
//
//   <out>/dataset.sha256            digests of the raw files (when none were supplied)
//   <out>/testsets/<name>.bin       the ten evaluation sets, CIFAR record format
//   <out>/testsets/<name>.jsonl     per-sample manifests
//   <out>/testsets/index.tsv
//   <out>/runs/s<N>-seed<S>/        checkpoints, train_log.tsv, mixture manifests
//   <out>/eval/s<N>-seed<S>/        eval.tsv, confidence.tsv, predictions.tsv
//   <out>/grid.csv, <out>/grid.md

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "iqals/config.hpp"
#include "iqals/dataset.hpp"
#include "iqals/digest.hpp"
#include "iqals/error.hpp"
#include "iqals/report.hpp"
#include "iqals/trainer.hpp"

namespace iqals::pipeline {

namespace fs = std::filesystem;

struct Layout {
  fs::path out;

  fs::path testsets() const { return out / "testsets"; }
  fs::path run_dir(int strategy, std::uint64_t seed) const {
    return out / "runs" / ("s" + std::to_string(strategy) + "-seed" + std::to_string(seed));
  }
  fs::path eval_dir(int strategy, std::uint64_t seed) const {
    return out / "eval" / ("s" + std::to_string(strategy) + "-seed" + std::to_string(seed));
  }
};

inline std::vector<std::string> provenance(const RunConfig& cfg) {
  return {std::string(kVersion), "config_hash " + cfg.hash(),
          "seed " + std::to_string(cfg.seed) + " test_seed " + std::to_string(cfg.test_seed),
          "config " + cfg.canonical()};
}

inline std::string provenance_line(const RunConfig& cfg) {
  std::string line;
  for (const auto& p : provenance(cfg)) line += (line.empty() ? "" : " | ") + p;
  return line;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------

inline fs::path require_data_dir(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) {
    throw ConfigError(std::string("no dataset location; pass --data or set ") + kDataEnvVar);
  }
  const auto dir = resolve_cifar_dir(cfg.data_dir);
  if (!fs::is_directory(dir)) throw DataError("dataset directory " + dir.string() + " does not exist");
  return dir;
}

// Verifies the raw files against a digest list when one is available
// (explicit path, or SHA256SUMS next to the data); otherwise records the
// digests of what was found.
inline void check_dataset_digests(const fs::path& dir, const fs::path& digests, const fs::path& out,
                                  std::ostream& log) {
  fs::path sums = digests;
  if (sums.empty() && fs::exists(dir / "SHA256SUMS")) sums = dir / "SHA256SUMS";
  if (!sums.empty()) {
    const auto checked = verify_digests(dir, sums);
    log << "verified " << checked.size() << " dataset files against " << sums.string() << "\n";
    return;
  }
  std::string listing;
  std::vector<std::string> files(kCifarTrainFiles.begin(), kCifarTrainFiles.end());
  files.emplace_back(kCifarTestFile);
  for (const auto& f : files) {
    if (!fs::exists(dir / f)) throw DataError("missing dataset file " + (dir / f).string());
    listing += sha256_file(dir / f) + "  " + f + "\n";
  }
  write_text(out / "dataset.sha256", listing);
  log << "no reference digests supplied; recorded observed digests in "
      << (out / "dataset.sha256").string() << "\n";
}

inline std::map<std::string, SampleList> run_prep(const RunConfig& cfg, const fs::path& digests,
                                                  std::ostream& log) {
  const auto dir = require_data_dir(cfg);
  const Layout layout{cfg.out_dir};
  fs::create_directories(layout.testsets());
  check_dataset_digests(dir, digests, layout.out, log);

  const auto data = load_cifar10(dir);
  log << "loaded " << data.train.size() << " training and " << data.test.size()
      << " test samples from " << dir.string() << "\n";
  SampleList test = data.test;
  if (cfg.test_limit > 0 && cfg.test_limit < test.size()) test.resize(cfg.test_limit);

  auto sets = build_test_sets(test, cfg.test_seed, cfg.workers);
  std::string index = "# " + provenance_line(cfg) + "\nset\tcount\tsha256\n";
  for (const auto& name : kTestSetNames) {
    const auto& samples = sets.at(name);
    write_cifar_file(layout.testsets() / (name + ".bin"), samples);
    write_manifest(layout.testsets() / (name + ".jsonl"), samples);
    index += name + "\t" + std::to_string(samples.size()) + "\t" + set_digest(samples) + "\n";
  }
  write_text(layout.testsets() / "index.tsv", index);
  log << "wrote " << sets.size() << " test sets to " << layout.testsets().string() << "\n";
  return sets;
}

inline std::map<std::string, SampleList> load_test_sets(const RunConfig& cfg) {
  const Layout layout{cfg.out_dir};
  if (!fs::exists(layout.testsets() / "index.tsv")) {
    throw DataError("no prepared test sets under " + layout.testsets().string() + "; run prep first");
  }
  std::map<std::string, SampleList> sets;
  for (const auto& name : kTestSetNames) {
    auto samples = read_cifar_file(layout.testsets() / (name + ".bin"));
    if (name != "pristine") {
      const auto dash = name.find('-');
      const Provenance p{false, parse_distortion_kind(name.substr(0, dash)),
                         std::stoi(name.substr(dash + 1))};
      for (auto& s : samples) s.provenance = p;
    }
    sets[name] = std::move(samples);
  }
  return sets;
}

// ---------------------------------------------------------------------------

inline TrainOptions train_options(const RunConfig& cfg, int strategy) {
  TrainOptions opt;
  opt.config = cfg.training;
  opt.config.seed = cfg.seed;
  opt.mixture_ratios = cfg.mixture_ratios;
  opt.checkpoint_every = cfg.checkpoint_every;
  opt.run_dir = Layout{cfg.out_dir}.run_dir(strategy, cfg.seed);
  opt.signature = cfg.training_signature(strategy);
  opt.workers = cfg.workers;
  return opt;
}

inline SampleList load_training_set(const RunConfig& cfg) {
  auto train = load_cifar10(require_data_dir(cfg)).train;
  if (cfg.train_limit > 0 && cfg.train_limit < train.size()) train.resize(cfg.train_limit);
  return train;
}

inline std::vector<TrainResult> run_train(const RunConfig& cfg, std::ostream& log) {
  const auto train_set = load_training_set(cfg);
  std::vector<TrainResult> results;
  for (int id : cfg.strategies) {
    const auto strategy = Strategy::from_id(id);
    auto opt = train_options(cfg, id);
    log << "training strategy " << strategy.describe() << " on " << train_set.size()
        << " samples -> " << opt.run_dir.string() << "\n";
    opt.on_epoch = [&](const EpochLog& e) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "  epoch %d/%d  loss %.6f  lr %.3g\n", e.epoch,
                    cfg.training.epochs, e.mean_loss, e.learning_rate);
      log << buf << std::flush;
    };
    auto result = train(strategy, opt, train_set);
    if (result.resumed_from > 0) log << "  (resumed from epoch " << result.resumed_from << ")\n";
    log << "  final checkpoint " << result.final_checkpoint.string() << "\n";
    results.push_back(std::move(result));
  }
  return results;
}

// ---------------------------------------------------------------------------

inline nn::ModelParams<float> load_model(const RunConfig& cfg, int strategy, fs::path* used = nullptr) {
  const auto dir = Layout{cfg.out_dir}.run_dir(strategy, cfg.seed);
  const auto ck = latest_checkpoint(dir);
  if (!ck) {
    throw DataError("no checkpoint for strategy " + Strategy::from_id(strategy).describe() +
                    " (seed " + std::to_string(cfg.seed) + ") under " + dir.string());
  }
  if (used) *used = *ck;
  return nn::load_checkpoint(*ck, nn::Architecture::standard()).params;
}

inline Grid make_grid(const RunConfig& cfg, const std::vector<EvalReport>& reports) {
  Grid g;
  g.provenance = provenance(cfg);
  for (const auto& r : reports) g.rows.push_back(grid_row(r));
  return g;
}

inline void write_grid(const RunConfig& cfg, const Grid& g) {
  for (const auto& f : cfg.formats) {
    if (f == "csv") write_text(fs::path(cfg.out_dir) / "grid.csv", to_delimited(g));
    if (f == "markdown") write_text(fs::path(cfg.out_dir) / "grid.md", to_markdown(g));
  }
}

inline Grid run_eval(const RunConfig& cfg, std::ostream& log) {
  const auto sets = load_test_sets(cfg);
  std::vector<EvalReport> reports;
  for (int id : cfg.strategies) {
    fs::path ck;
    const auto params = load_model(cfg, id, &ck);
    log << "evaluating " << Strategy::from_id(id).describe() << " from " << ck.string() << "\n";
    auto report = evaluate(params, sets, id, {cfg.probe_count, 100, cfg.workers});
    const auto line = provenance_line(cfg) + " | checkpoint " + ck.filename().string() +
                      " sha256 " + sha256_file(ck);
    write_eval_report(report, Layout{cfg.out_dir}.eval_dir(id, cfg.seed), line);
    reports.push_back(std::move(report));
  }
  auto grid = make_grid(cfg, reports);
  write_grid(cfg, grid);
  return grid;
}

inline std::vector<EvalReport> read_reports(const RunConfig& cfg) {
  std::vector<EvalReport> reports;
  for (int id : cfg.strategies) {
    const auto dir = Layout{cfg.out_dir}.eval_dir(id, cfg.seed);
    if (!fs::exists(dir / "eval.tsv")) {
      throw DataError("no evaluation for strategy " + Strategy::from_id(id).describe() +
                      " (seed " + std::to_string(cfg.seed) + "); run eval first");
    }
    auto r = read_eval_report(dir);
    r.strategy = id;
    reports.push_back(std::move(r));
  }
  return reports;
}

// Mean true-class confidence over the probe images at each level of one
// distortion kind (level 0 = pristine set).
inline std::array<double, 4> mean_confidence(const EvalReport& r, DistortionKind kind) {
  std::array<double, 4> sum{}, count{};
  const std::string prefix = std::string(to_string(kind)) + "-";
  for (const auto& c : r.confidences) {
    int level = -1;
    if (c.set == "pristine") level = 0;
    else if (c.set.starts_with(prefix)) level = c.level;
    if (level < 0 || level > 3) continue;
    sum[static_cast<std::size_t>(level)] += c.confidence;
    count[static_cast<std::size_t>(level)] += 1.0;
  }
  for (std::size_t i = 0; i < 4; ++i) sum[i] = count[i] > 0 ? sum[i] / count[i] : 0.0;
  return sum;
}

inline std::string confidence_listing(const std::vector<EvalReport>& reports) {
  std::string out = "strategy\tkind\tlevel0\tlevel1\tlevel2\tlevel3\n";
  char buf[160];
  for (const auto& r : reports)
    for (DistortionKind kind : kAllDistortionKinds) {
      const auto m = mean_confidence(r, kind);
      std::snprintf(buf, sizeof buf, "%d\t%s\t%.4f\t%.4f\t%.4f\t%.4f\n", r.strategy,
                    std::string(to_string(kind)).c_str(), m[0], m[1], m[2], m[3]);
      out += buf;
    }
  return out;
}

}  // namespace iqals::pipeline

#endif  // IQALS_PIPELINE_HPP
