#ifndef IQALS_TRAINER_HPP
#define IQALS_TRAINER_HPP

// The nine training strategies, resumable training, and evaluation over the
// ten test sets.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "iqals/dataset.hpp"
#include "iqals/distort.hpp"
#include "iqals/error.hpp"
#include "iqals/nn/checkpoint.hpp"
#include "iqals/nn/labels.hpp"
#include "iqals/nn/network.hpp"
#include "iqals/nn/sgd.hpp"
#include "iqals/parallel.hpp"

namespace iqals {

enum class Regularization { kOriginal, kIqaLabelSmoothing };
enum class TrainingSet { kPristine, kMixBlur, kMixNoise, kMixJpeg, kMixAll3 };

inline std::string_view to_string(Regularization r) {
  return r == Regularization::kOriginal ? "Original" : "IQA-LS";
}

inline std::string_view to_string(TrainingSet s) {
  switch (s) {
    case TrainingSet::kPristine:
      return "Pristine";
    case TrainingSet::kMixBlur:
      return "MIX_blur";
    case TrainingSet::kMixNoise:
      return "MIX_noise";
    case TrainingSet::kMixJpeg:
      return "MIX_JPEG";
    case TrainingSet::kMixAll3:
      return "MIX_all3";
  }
  return "?";
}

class Strategy {
 public:
  static constexpr int kCount = 9;

  static Strategy from_id(int id) {
    static constexpr std::array<std::pair<Regularization, TrainingSet>, kCount> kTable = {{
        {Regularization::kOriginal, TrainingSet::kPristine},
        {Regularization::kOriginal, TrainingSet::kMixBlur},
        {Regularization::kIqaLabelSmoothing, TrainingSet::kMixBlur},
        {Regularization::kOriginal, TrainingSet::kMixNoise},
        {Regularization::kIqaLabelSmoothing, TrainingSet::kMixNoise},
        {Regularization::kOriginal, TrainingSet::kMixJpeg},
        {Regularization::kIqaLabelSmoothing, TrainingSet::kMixJpeg},
        {Regularization::kOriginal, TrainingSet::kMixAll3},
        {Regularization::kIqaLabelSmoothing, TrainingSet::kMixAll3},
    }};
    if (id < 1 || id > kCount) {
      throw ConfigError("invalid strategy " + std::to_string(id) + "; valid strategies:\n" +
                        listing());
    }
    const auto& [reg, set] = kTable[static_cast<std::size_t>(id - 1)];
    return Strategy(id, reg, set);
  }

  static std::vector<Strategy> all() {
    std::vector<Strategy> out;
    for (int id = 1; id <= kCount; ++id) out.push_back(from_id(id));
    return out;
  }

  static std::string listing() {
    std::string s;
    for (int id = 1; id <= kCount; ++id) s += "  " + from_id(id).describe() + "\n";
    return s;
  }

  int id() const { return id_; }
  Regularization regularization() const { return reg_; }
  TrainingSet training_set() const { return set_; }

  std::vector<DistortionKind> distortion_kinds() const {
    switch (set_) {
      case TrainingSet::kPristine:
        return {};
      case TrainingSet::kMixBlur:
        return {DistortionKind::kBlur};
      case TrainingSet::kMixNoise:
        return {DistortionKind::kNoise};
      case TrainingSet::kMixJpeg:
        return {DistortionKind::kJpeg};
      case TrainingSet::kMixAll3:
        return {DistortionKind::kBlur, DistortionKind::kNoise, DistortionKind::kJpeg};
    }
    return {};
  }

  std::string describe() const {
    return std::to_string(id_) + ": " + std::string(to_string(reg_)) + " / " +
           std::string(to_string(set_));
  }

 private:
  Strategy(int id, Regularization reg, TrainingSet set) : id_(id), reg_(reg), set_(set) {}
  int id_;
  Regularization reg_;
  TrainingSet set_;
};

inline nn::ProbDistribution training_target(const Strategy& s, const LabeledSample& sample) {
  return s.regularization() == Regularization::kOriginal
             ? nn::onehot(sample.label)
             : nn::smooth_labels(sample.label, sample.quality);
}

// ---------------------------------------------------------------------------
// Training

struct EpochLog {
  int epoch = 0;  // 1-based count of completed epochs
  double mean_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainOptions {
  nn::TrainingConfig config;
  nn::Architecture arch = nn::Architecture::standard();
  std::array<double, 4> mixture_ratios = {0.60, 0.15, 0.15, 0.10};
  int checkpoint_every = 50;
  std::filesystem::path run_dir;
  // Single-line rendering of every setting that affects the parameter
  // trajectory; stored in checkpoints and compared on resume.
  std::string signature;
  Distorter distorter = default_distorter;
  std::function<void(const EpochLog&)> on_epoch;
  unsigned workers = 0;
  bool check_targets = false;  // validate every target distribution
  int manifest_epochs = 1;      // write the mixture manifest of the first N epochs
};

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::vector<EpochLog> log;
  nn::ModelParams<float> params;
  int resumed_from = 0;
};

inline std::string mixture_manifest_name(int epoch) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "mixture-epoch-%05d.jsonl", epoch);
  return buf;
}

inline MixturePlan training_mixture_plan(const Strategy& strategy, const TrainOptions& opt) {
  MixturePlan plan;
  plan.ratios = opt.mixture_ratios;
  plan.seed = mix_seed({opt.config.seed, 0x313CULL});
  plan.kinds = strategy.distortion_kinds();
  return plan;
}

inline std::string checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt-epoch-%05d.bin", epoch);
  return buf;
}

// Latest checkpoint in a run directory, if any.
inline std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) return std::nullopt;
  std::optional<std::filesystem::path> best;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("ckpt-epoch-") && name.ends_with(".bin")) {
      if (!best || name > best->filename().string()) best = entry.path();
    }
  }
  return best;
}

inline std::string render_log(const std::vector<EpochLog>& log) {
  std::string out = "epoch\tmean_loss\tlearning_rate\n";
  char buf[96];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%d\t%.9g\t%.9g\n", e.epoch, e.mean_loss, e.learning_rate);
    out += buf;
  }
  return out;
}

inline std::vector<EpochLog> read_log(const std::filesystem::path& path) {
  std::vector<EpochLog> log;
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    EpochLog e;
    if (ls >> e.epoch >> e.mean_loss >> e.learning_rate) log.push_back(e);
  }
  return log;
}

inline TrainResult train(const Strategy& strategy, const TrainOptions& opt,
                         std::span<const LabeledSample> pristine) {
  const auto& cfg = opt.config;
  cfg.validate();
  if (pristine.empty()) throw DataError("training set is empty");
  if (opt.checkpoint_every <= 0) throw ConfigError("checkpoint interval must be positive");
  if (opt.run_dir.empty()) throw ConfigError("training needs a run directory");
  std::filesystem::create_directories(opt.run_dir);
  const auto config_hash = hex64(fnv1a64(opt.signature));

  TrainResult result;
  auto params = nn::initialize<float>(opt.arch, cfg.seed);
  auto velocity = nn::ModelParams<float>::zeros(opt.arch);
  int start_epoch = 0;

  if (const auto last = latest_checkpoint(opt.run_dir)) {
    auto ck = nn::load_checkpoint(*last, opt.arch);
    if (ck.header.config_hash != config_hash || ck.header.strategy != strategy.id() ||
        ck.header.seed != cfg.seed) {
      throw ConfigError("refusing to resume from " + last->string() +
                        ": it was written by a different configuration (" + ck.header.config +
                        ")");
    }
    params = std::move(ck.params);
    if (ck.header.optimizer_state) velocity = std::move(ck.velocity);
    start_epoch = ck.header.epoch;
    result.resumed_from = start_epoch;
    for (const auto& e : read_log(opt.run_dir / "train_log.tsv"))
      if (e.epoch <= start_epoch) result.log.push_back(e);
  }

  const auto plan = training_mixture_plan(strategy, opt);
  const bool mixed = strategy.training_set() != TrainingSet::kPristine;
  if (mixed) plan.validate();

  const nn::BackwardOptions backward_options{cfg.weight_decay, cfg.loss};
  const std::size_t n = pristine.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    SampleList mixture;
    std::span<const LabeledSample> data = pristine;
    if (mixed) {
      mixture = build_epoch_mixture(pristine, plan, opt.distorter, epoch, opt.workers);
      data = mixture;
      if (epoch < opt.manifest_epochs) {
        write_manifest(opt.run_dir / mixture_manifest_name(epoch + 1), mixture);
      }
    }
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    Rng(mix_seed({cfg.seed, static_cast<std::uint64_t>(epoch), 0x5A3DULL}))
        .shuffle(std::span(order));

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<const Image*> images;
    std::vector<nn::ProbDistribution> targets;
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const std::size_t end = std::min(n, begin + batch);
      images.clear();
      targets.clear();
      for (std::size_t k = begin; k < end; ++k) {
        const auto& s = data[order[k]];
        images.push_back(&s.image);
        targets.push_back(training_target(strategy, s));
        if (opt.check_targets && !targets.back().is_valid()) {
          throw NumericError("invalid training target for sample " + std::to_string(order[k]));
        }
      }
      const auto cache = nn::forward(params, nn::make_batch<float>(images));
      const auto step = nn::backward(params, cache, targets, backward_options);
      if (!std::isfinite(step.total_loss())) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1));
      }
      nn::sgd_step(params, step.gradients, cfg, epoch, &velocity);
      loss_sum += step.total_loss();
      ++batches;
    }

    const EpochLog entry{epoch + 1, loss_sum / static_cast<double>(batches),
                         nn::learning_rate(cfg, epoch)};
    result.log.push_back(entry);
    {
      std::ofstream log(opt.run_dir / "train_log.tsv", std::ios::trunc);
      log << render_log(result.log);
    }
    if (opt.on_epoch) opt.on_epoch(entry);

    if ((epoch + 1) % opt.checkpoint_every == 0 || epoch + 1 == cfg.epochs) {
      nn::Checkpoint ck;
      ck.header.config = opt.signature;
      ck.header.config_hash = config_hash;
      ck.header.strategy = strategy.id();
      ck.header.seed = cfg.seed;
      ck.header.epoch = epoch + 1;
      ck.header.optimizer_state = cfg.momentum > 0.0;
      ck.params = params;
      ck.velocity = velocity;
      nn::save_checkpoint(ck, opt.run_dir / checkpoint_name(epoch + 1));
    }
  }

  result.final_checkpoint = opt.run_dir / checkpoint_name(cfg.epochs);
  result.params = std::move(params);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

// Softmax outputs for every sample, batch-wise; row-major (n x classes).
inline std::vector<double> predict(const nn::ModelParams<float>& params,
                                   std::span<const LabeledSample> samples, int batch = 100) {
  const int classes = params.arch.classes;
  std::vector<double> probs(samples.size() * static_cast<std::size_t>(classes));
  std::vector<const Image*> images;
  for (std::size_t begin = 0; begin < samples.size(); begin += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(samples.size(), begin + static_cast<std::size_t>(batch));
    images.clear();
    for (std::size_t k = begin; k < end; ++k) images.push_back(&samples[k].image);
    const auto cache = nn::forward(params, nn::make_batch<float>(images));
    std::copy(cache.probs.begin(), cache.probs.end(),
              probs.begin() + static_cast<std::ptrdiff_t>(begin * classes));
  }
  return probs;
}

struct ConfidenceRecord {
  std::size_t image_id = 0;
  int true_class = 0;
  std::string set;  // test-set name
  int level = 0;    // 0 for pristine
  double confidence = 0.0;
};

struct EvalReport {
  int strategy = 0;
  std::map<std::string, double> accuracy;
  std::map<std::string, std::vector<int>> predictions;
  std::vector<ConfidenceRecord> confidences;
};

struct EvalOptions {
  std::size_t probe_count = 100;  // leading images of each set traced for confidence
  int batch = 100;
  unsigned workers = 0;
};

inline int argmax(std::span<const double> p) {
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

inline EvalReport evaluate(const nn::ModelParams<float>& params,
                           const std::map<std::string, SampleList>& sets, int strategy = 0,
                           const EvalOptions& opt = {}) {
  const auto classes = static_cast<std::size_t>(params.arch.classes);
  std::vector<const std::pair<const std::string, SampleList>*> entries;
  for (const auto& kv : sets) entries.push_back(&kv);

  struct Partial {
    double accuracy = 0.0;
    std::vector<int> predictions;
    std::vector<ConfidenceRecord> confidences;
  };
  std::vector<Partial> partial(entries.size());
  parallel_for(
      entries.size(),
      [&](std::size_t e) {
        const auto& [name, samples] = *entries[e];
        if (samples.empty()) throw DataError("test set '" + name + "' is empty");
        const auto probs = predict(params, samples, opt.batch);
        auto& out = partial[e];
        std::size_t correct = 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
          const auto p = std::span(probs).subspan(i * classes, classes);
          const int pred = argmax(p);
          out.predictions.push_back(pred);
          if (pred == samples[i].label) ++correct;
          if (i < opt.probe_count) {
            out.confidences.push_back({i, samples[i].label, name, samples[i].provenance.level,
                                       p[static_cast<std::size_t>(samples[i].label)]});
          }
        }
        out.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
      },
      opt.workers);

  EvalReport report;
  report.strategy = strategy;
  for (std::size_t e = 0; e < entries.size(); ++e) {
    report.accuracy[entries[e]->first] = partial[e].accuracy;
    report.predictions[entries[e]->first] = std::move(partial[e].predictions);
    report.confidences.insert(report.confidences.end(), partial[e].confidences.begin(),
                              partial[e].confidences.end());
  }
  return report;
}

// Softmax probability of the true class for the pristine image and for each
// requested level of one distortion kind. The first entry is level 0.
inline std::vector<std::pair<int, double>> confidence_trace(const nn::ModelParams<float>& params,
                                                            const Image& image, int true_class,
                                                            DistortionKind kind,
                                                            std::span<const int> levels,
                                                            std::uint64_t seed = 0) {
  std::vector<Image> images{image};
  for (int level : levels) {
    images.push_back(apply(DistortionSpec::at_level(kind, level), image, seed));
  }
  std::vector<const Image*> ptrs;
  for (const auto& img : images) ptrs.push_back(&img);
  const auto cache = nn::forward(params, nn::make_batch<float>(ptrs));
  std::vector<std::pair<int, double>> trace;
  trace.emplace_back(0, cache.probabilities(0)[static_cast<std::size_t>(true_class)]);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    trace.emplace_back(levels[i], cache.probabilities(static_cast<int>(i + 1))[static_cast<std::size_t>(true_class)]);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Report files

inline void write_eval_report(const EvalReport& r, const std::filesystem::path& dir,
                              const std::string& provenance) {
  std::filesystem::create_directories(dir);
  char buf[160];
  {
    std::ofstream out(dir / "eval.tsv", std::ios::trunc);
    out << "# " << provenance << "\n# strategy " << r.strategy << "\nset\taccuracy\n";
    for (const auto& name : kTestSetNames) {
      const auto it = r.accuracy.find(name);
      if (it == r.accuracy.end()) continue;
      std::snprintf(buf, sizeof buf, "%s\t%.6f\n", name.c_str(), it->second);
      out << buf;
    }
  }
  {
    std::ofstream out(dir / "confidence.tsv", std::ios::trunc);
    out << "image_id\ttrue_class\tset\tlevel\tconfidence\n";
    for (const auto& c : r.confidences) {
      std::snprintf(buf, sizeof buf, "%zu\t%d\t%s\t%d\t%.6f\n", c.image_id, c.true_class,
                    c.set.c_str(), c.level, c.confidence);
      out << buf;
    }
  }
  {
    std::ofstream out(dir / "predictions.tsv", std::ios::trunc);
    out << "set\tindex\tpredicted\n";
    for (const auto& name : kTestSetNames) {
      const auto it = r.predictions.find(name);
      if (it == r.predictions.end()) continue;
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        out << name << '\t' << i << '\t' << it->second[i] << '\n';
      }
    }
  }
}

inline EvalReport read_eval_report(const std::filesystem::path& dir) {
  std::ifstream in(dir / "eval.tsv");
  if (!in) throw DataError("missing evaluation report " + (dir / "eval.tsv").string());
  EvalReport r;
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with("# strategy ")) {
      r.strategy = std::stoi(line.substr(11));
      continue;
    }
    if (line.empty() || line[0] == '#' || line.starts_with("set\t")) continue;
    const auto tab = line.find('\t');
    r.accuracy[line.substr(0, tab)] = std::stod(line.substr(tab + 1));
  }
  std::ifstream conf(dir / "confidence.tsv");
  std::getline(conf, line);
  while (std::getline(conf, line)) {
    std::istringstream ls(line);
    ConfidenceRecord c;
    if (ls >> c.image_id >> c.true_class >> c.set >> c.level >> c.confidence) {
      r.confidences.push_back(c);
    }
  }
  return r;
}

}  // namespace iqals

#endif  // IQALS_TRAINER_HPP
