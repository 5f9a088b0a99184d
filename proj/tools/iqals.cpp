// iqals: prepare test sets, train the nine strategies, evaluate them and
// render accuracy grids; plus score/distort passthroughs for inspection.
//
// Exit codes: 0 success, 1 usage/configuration error, 2 data error,
// 3 runtime or numeric error.

#include <cstdio>
#include <cstdlib>
#include <deque>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "iqals/config.hpp"
#include "iqals/distort.hpp"
#include "iqals/iqa.hpp"
#include "iqals/pipeline.hpp"
#include "png_io.hpp"

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Flag name -> config key. Each is registered as a string option and handed
// to RunConfig::set, so flags and config files share one parser.
struct FlagBinding {
  const char* flag;
  const char* key;
  const char* help;
};

const std::vector<FlagBinding> kCommonFlags = {
    {"--data", "data_dir", "CIFAR-10 binary directory (default: $IQALS_DATA)"},
    {"--out", "out_dir", "output directory"},
    {"--seed", "seed", "training / mixture seed"},
    {"--workers", "workers", "worker threads (0 = all cores)"},
};

const std::vector<FlagBinding> kStrategyFlags = {
    {"--strategy", "strategies", "strategy id(s) 1-9, comma separated"},
};

const std::vector<FlagBinding> kPrepFlags = {
    {"--test-seed", "test_seed", "seed of the distorted test sets"},
    {"--test-limit", "test_limit", "use only the first N test images (0 = all)"},
};

const std::vector<FlagBinding> kTrainFlags = {
    {"--preset", "preset", "full (2000 epochs) or desk (100 epochs)"},
    {"--epochs", "epochs", "epoch budget"},
    {"--batch-size", "batch_size", "mini-batch size"},
    {"--learning-rate", "learning_rate", "initial learning rate"},
    {"--decay-factor", "decay_factor", "learning-rate decay factor"},
    {"--decay-every", "decay_every", "epochs between decays"},
    {"--weight-decay", "weight_decay", "fc weight-decay coefficient"},
    {"--momentum", "momentum", "heavy-ball momentum (0 = plain SGD)"},
    {"--loss", "loss", "squared_error | cross_entropy"},
    {"--mixture-ratios", "mixture_ratios", "pristine,level1,level2,level3 fractions"},
    {"--checkpoint-every", "checkpoint_every", "epochs between checkpoints"},
    {"--train-limit", "train_limit", "use only the first N training images (0 = all)"},
};

const std::vector<FlagBinding> kEvalFlags = {
    {"--probe-count", "probe_count", "images per set recorded for confidence traces"},
    {"--formats", "formats", "grid formats: csv,markdown"},
};

struct Bound {
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

// A deque keeps every bound string at a stable address for CLI11.
void bind(CLI::App* app, const std::vector<FlagBinding>& flags, std::deque<Bound>& out) {
  for (const auto& f : flags) {
    auto& b = out.emplace_back();
    b.key = f.key;
    b.option = app->add_option(f.flag, b.value, f.help);
  }
}

int exit_code_for(const iqals::Error& e) {
  if (dynamic_cast<const iqals::ConfigError*>(&e)) return 1;
  if (dynamic_cast<const iqals::DataError*>(&e)) return 2;
  return 3;
}

void print_config(const iqals::RunConfig& cfg, const std::string& file) {
  std::cerr << "# " << iqals::kVersion << "\n# effective configuration (flags > "
            << (file.empty() ? "" : file + " > ") << "defaults):\n";
  for (const auto& [k, v] : cfg.rendered()) std::cerr << "#   " << k << " = " << v << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image-quality-aware label smoothing on CIFAR-10"};
  app.set_version_flag("--version", iqals::kVersion);
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::string> sets;
  std::deque<Bound> bound;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "key = value configuration file")
        ->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "extra key=value override (repeatable)");
    bind(sub, kCommonFlags, bound);
  };

  auto* prep = app.add_subcommand("prep", "verify the dataset and materialize the ten test sets");
  common(prep);
  bind(prep, kPrepFlags, bound);
  std::string digests;
  prep->add_option("--digests", digests, "sha256sum-style list to verify the raw files against");

  auto* train = app.add_subcommand("train", "train one or more strategies (resumable)");
  common(train);
  bind(train, kStrategyFlags, bound);
  bind(train, kTrainFlags, bound);

  auto* eval = app.add_subcommand("eval", "evaluate checkpoints on the ten test sets");
  common(eval);
  bind(eval, kStrategyFlags, bound);
  bind(eval, kEvalFlags, bound);

  auto* report = app.add_subcommand("report", "render the accuracy grid from saved evaluations");
  common(report);
  bind(report, kStrategyFlags, bound);
  bind(report, {{"--formats", "formats", "grid formats: csv,markdown"}}, bound);
  bool confidence = false;
  report->add_flag("--confidence", confidence, "also list mean true-class confidence per level");

  auto* score = app.add_subcommand("score", "SSIM of a distorted PNG against its reference");
  std::string ref_png, dist_png;
  score->add_option("--ref", ref_png, "reference 32x32 PNG")->required();
  score->add_option("--dist", dist_png, "distorted 32x32 PNG")->required();

  auto* distort = app.add_subcommand("distort", "apply one distortion to a 32x32 PNG");
  std::string in_png, out_png, kind_name;
  int level = 1;
  std::uint64_t distort_seed = 0;
  distort->add_option("--input", in_png, "input 32x32 PNG")->required();
  distort->add_option("--output", out_png, "output PNG")->required();
  distort->add_option("--kind", kind_name, "blur | noise | jpeg")->required();
  distort->add_option("--level", level, "distortion level 1-3")->check(CLI::Range(1, 3));
  distort->add_option("--seed", distort_seed, "noise seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (score->parsed()) {
      const auto q = iqals::ssim(iqals::tools::read_png(ref_png), iqals::tools::read_png(dist_png));
      std::printf("raw %.6f\ntransformed %.6f\n", q.raw, q.transformed);
      return 0;
    }
    if (distort->parsed()) {
      const auto spec =
          iqals::DistortionSpec::at_level(iqals::parse_distortion_kind(kind_name), level);
      const auto src = iqals::tools::read_png(in_png);
      const auto out = iqals::apply(spec, src, distort_seed);
      iqals::tools::write_png(out_png, out);
      const auto q = iqals::ssim(src, out);
      std::printf("%s -> %s (%s) ssim %.6f\n", in_png.c_str(), out_png.c_str(), spec.name().c_str(),
                  q.raw);
      return 0;
    }

    Overrides overrides;
    for (const auto& b : bound)
      if (b.option && b.option->count() > 0) overrides.emplace_back(b.key, b.value);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw iqals::ConfigError("--set expects key=value, got '" + s + "'");
      overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    auto cfg = iqals::resolve_config(config_file, overrides);
    if (cfg.data_dir.empty())
      if (const char* env = std::getenv(iqals::kDataEnvVar)) cfg.data_dir = env;
    print_config(cfg, config_file);

    if (prep->parsed()) {
      iqals::pipeline::run_prep(cfg, digests, std::cerr);
    } else if (train->parsed()) {
      iqals::pipeline::run_train(cfg, std::cerr);
    } else if (eval->parsed()) {
      const auto grid = iqals::pipeline::run_eval(cfg, std::cerr);
      std::cout << iqals::to_markdown(grid);
    } else if (report->parsed()) {
      const auto reports = iqals::pipeline::read_reports(cfg);
      const auto grid = iqals::pipeline::make_grid(cfg, reports);
      iqals::pipeline::write_grid(cfg, grid);
      for (const auto& f : cfg.formats)
        std::cout << (f == "csv" ? iqals::to_delimited(grid) : iqals::to_markdown(grid)) << "\n";
      if (confidence) std::cout << iqals::pipeline::confidence_listing(reports);
    }
    return 0;
  } catch (const iqals::Error& e) {
    std::cerr << "iqals: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "iqals: " << e.what() << "\n";
    return 3;
  }
}
