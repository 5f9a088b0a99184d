#ifndef IQALS_DATASET_HPP
#define IQALS_DATASET_HPP

// CIFAR-10 ingestion, per-epoch pristine/distorted training mixtures and the
// ten fixed evaluation sets.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "iqals/digest.hpp"
#include "iqals/distort.hpp"
#include "iqals/error.hpp"
#include "iqals/image.hpp"
#include "iqals/iqa.hpp"
#include "iqals/nn/labels.hpp"
#include "iqals/parallel.hpp"
#include "iqals/rng.hpp"

namespace iqals {

inline constexpr int kCifarRecordBytes = 1 + kImageBytes;
inline constexpr std::uint64_t kTestSetSeed = 20180101;

inline const std::array<const char*, 5> kCifarTrainFiles = {
    "data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin",
    "data_batch_5.bin"};
inline constexpr const char* kCifarTestFile = "test_batch.bin";

// Column order of every evaluation grid.
inline const std::array<std::string, 10> kTestSetNames = {
    "pristine", "blur-1",  "blur-2",  "blur-3", "noise-1",
    "noise-2",  "noise-3", "jpeg-1",  "jpeg-2", "jpeg-3"};

struct Provenance {
  bool pristine = true;
  DistortionKind kind = DistortionKind::kBlur;
  int level = 0;  // 0 for pristine

  std::string name() const {
    return pristine ? "pristine" : std::string(to_string(kind)) + "-" + std::to_string(level);
  }
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct LabeledSample {
  Image image;
  int label = 0;
  double quality = 1.0;  // transformed SSIM against the pristine original
  Provenance provenance;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

using SampleList = std::vector<LabeledSample>;

struct Cifar10 {
  SampleList train;
  SampleList test;
};

// Reads one CIFAR-10 binary batch file: records of 1 label byte followed by
// 3072 plane-major pixel bytes.
inline SampleList read_cifar_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing dataset file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw DataError("truncated dataset file " + path.string() + ": record " +
                    std::to_string(records) + " is incomplete at byte offset " +
                    std::to_string(records * kCifarRecordBytes));
  }
  SampleList out(records);
  for (std::size_t r = 0; r < records; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] >= nn::kNumClasses) {
      throw DataError("corrupt record " + std::to_string(r) + " in " + path.string() +
                      " at byte offset " + std::to_string(r * kCifarRecordBytes) +
                      ": label byte " + std::to_string(rec[0]));
    }
    out[r].label = rec[0];
    out[r].image = Image(std::span(rec + 1, kImageBytes));
  }
  return out;
}

inline void write_cifar_file(const std::filesystem::path& path, std::span<const LabeledSample> samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& s : samples) {
    out.put(static_cast<char>(s.label));
    const auto b = s.image.bytes();
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  }
  if (!out) throw Error("failed writing " + path.string());
}

// Accepts either the extracted "cifar-10-batches-bin" directory or its parent.
inline std::filesystem::path resolve_cifar_dir(const std::filesystem::path& path) {
  if (std::filesystem::exists(path / kCifarTestFile)) return path;
  if (std::filesystem::exists(path / "cifar-10-batches-bin" / kCifarTestFile)) {
    return path / "cifar-10-batches-bin";
  }
  return path;
}

inline Cifar10 load_cifar10(const std::filesystem::path& location) {
  const auto dir = resolve_cifar_dir(location);
  Cifar10 data;
  for (const char* name : kCifarTrainFiles) {
    auto part = read_cifar_file(dir / name);
    data.train.insert(data.train.end(), part.begin(), part.end());
  }
  data.test = read_cifar_file(dir / kCifarTestFile);
  return data;
}

// Checks files against a "sha256sum"-style list ("<hex>  <file>" per line).
// Returns the files checked; a mismatch names the file.
inline std::vector<std::string> verify_digests(const std::filesystem::path& dir,
                                               const std::filesystem::path& sums) {
  std::ifstream in(sums);
  if (!in) throw DataError("cannot open digest list " + sums.string());
  std::vector<std::string> checked;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string digest, file;
    if (!(ls >> digest >> file)) continue;
    if (!file.empty() && file[0] == '*') file.erase(0, 1);
    const auto actual = sha256_file(dir / file);
    if (actual != digest) {
      throw DataError("digest mismatch for " + (dir / file).string() + ": expected " + digest +
                      ", got " + actual);
    }
    checked.push_back(file);
  }
  return checked;
}

// SHA-256 of one sample as its CIFAR record (label byte + pixels).
inline std::string sample_digest(const LabeledSample& s) {
  const auto label = static_cast<std::uint8_t>(s.label);
  return Sha256().update(std::span(&label, 1)).update(s.image.bytes()).hex();
}

inline std::string set_digest(std::span<const LabeledSample> samples) {
  Sha256 sha;
  for (const auto& s : samples) {
    const auto label = static_cast<std::uint8_t>(s.label);
    sha.update(std::span(&label, 1)).update(s.image.bytes());
  }
  return sha.hex();
}

// ---------------------------------------------------------------------------
// Mixtures

struct MixturePlan {
  // pristine, level 1, level 2, level 3
  std::array<double, 4> ratios = {0.60, 0.15, 0.15, 0.10};
  std::uint64_t seed = 0;
  std::vector<DistortionKind> kinds;  // one kind, or several drawn uniformly per sample

  void validate() const {
    double sum = 0.0;
    for (double r : ratios) {
      if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("mixture ratios must lie in [0,1]");
      sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw ConfigError("mixture ratios must sum to 1 (got " + std::to_string(sum) + ")");
    }
    if (kinds.empty() && ratios[0] != 1.0) {
      throw ConfigError("mixture plan with distorted buckets needs at least one distortion kind");
    }
  }
};

// Largest-remainder apportionment of n items; ties go to the lower bucket.
inline std::array<std::size_t, 4> bucket_sizes(std::size_t n, const std::array<double, 4>& ratios) {
  std::array<std::size_t, 4> sizes{};
  std::array<double, 4> remainders{};
  std::size_t assigned = 0;
  for (std::size_t b = 0; b < 4; ++b) {
    const double exact = ratios[b] * static_cast<double>(n);
    // guard against 0.15 * 50000 = 7499.999...
    const double snapped = std::abs(exact - std::round(exact)) < 1e-9 ? std::round(exact) : exact;
    sizes[b] = static_cast<std::size_t>(std::floor(snapped));
    remainders[b] = snapped - std::floor(snapped);
    assigned += sizes[b];
  }
  std::array<std::size_t, 4> order = {0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[order[i % 4]];
  return sizes;
}

using Distorter = std::function<Image(const Image&, DistortionKind, int level, std::uint64_t seed)>;

inline Image default_distorter(const Image& img, DistortionKind kind, int level,
                               std::uint64_t seed) {
  return apply(DistortionSpec::at_level(kind, level), img, seed);
}

// Bucket (0 = pristine, 1..3 = distortion level) of every sample for one epoch.
inline std::vector<int> mixture_buckets(std::size_t n, const MixturePlan& plan, int epoch) {
  const auto sizes = bucket_sizes(n, plan.ratios);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  Rng rng(mix_seed({plan.seed, static_cast<std::uint64_t>(epoch), 0xB0C4E7ULL}));
  rng.shuffle(std::span(order));
  std::vector<int> bucket(n, 0);
  std::size_t pos = 0;
  for (int b = 0; b < 4; ++b)
    for (std::size_t k = 0; k < sizes[static_cast<std::size_t>(b)]; ++k) bucket[order[pos++]] = b;
  return bucket;
}

// The epoch's training list: same order and size as `pristine`, with each
// sample in a distorted bucket replaced by its distorted version and scored
// against the original.
inline SampleList build_epoch_mixture(std::span<const LabeledSample> pristine,
                                      const MixturePlan& plan, const Distorter& distorter,
                                      int epoch, unsigned workers = 0) {
  plan.validate();
  const auto bucket = mixture_buckets(pristine.size(), plan, epoch);
  SampleList out(pristine.begin(), pristine.end());
  parallel_for(
      out.size(),
      [&](std::size_t i) {
        const int level = bucket[i];
        if (level == 0) return;
        const auto e = static_cast<std::uint64_t>(epoch);
        DistortionKind kind = plan.kinds.front();
        if (plan.kinds.size() > 1) {
          Rng pick(mix_seed({plan.seed, e, i, 0x4B1DULL}));
          kind = plan.kinds[pick.uniform_index(plan.kinds.size())];
        }
        auto& s = out[i];
        s.image = distorter(pristine[i].image, kind, level, mix_seed({plan.seed, e, i}));
        s.quality = ssim(pristine[i].image, s.image).transformed;
        s.provenance = {false, kind, level};
      },
      workers);
  return out;
}

// Pristine set plus {blur, noise, jpeg} x {1, 2, 3}, keyed by kTestSetNames.
inline std::map<std::string, SampleList> build_test_sets(std::span<const LabeledSample> test,
                                                         std::uint64_t seed = kTestSetSeed,
                                                         unsigned workers = 0) {
  std::map<std::string, SampleList> sets;
  sets["pristine"] = SampleList(test.begin(), test.end());
  std::uint64_t set_id = 0;
  for (DistortionKind kind : kAllDistortionKinds) {
    for (int level = 1; level <= 3; ++level, ++set_id) {
      const auto spec = DistortionSpec::at_level(kind, level);
      SampleList out(test.begin(), test.end());
      parallel_for(
          out.size(),
          [&](std::size_t i) {
            auto& s = out[i];
            s.image = apply(spec, test[i].image, mix_seed({seed, set_id, i}));
            s.quality = ssim(test[i].image, s.image).transformed;
            s.provenance = {false, kind, level};
          },
          workers);
      sets[spec.name()] = std::move(out);
    }
  }
  return sets;
}

// One JSON object per line: index, bucket, kind, level, quality, digest;
// JPEG samples also name the codec convention and quality factor.
inline std::string manifest_lines(std::span<const LabeledSample> samples) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    std::snprintf(buf, sizeof buf, "%.9f", s.quality);
    out += "{\"index\":" + std::to_string(i) + ",\"label\":" + std::to_string(s.label) +
           ",\"bucket\":" + std::to_string(s.provenance.level) + ",\"kind\":\"" +
           (s.provenance.pristine ? "pristine" : std::string(to_string(s.provenance.kind))) +
           "\",\"level\":" + std::to_string(s.provenance.level) + ",\"quality\":" + buf +
           ",\"digest\":\"" + sample_digest(s) + "\"";
    if (!s.provenance.pristine && s.provenance.kind == DistortionKind::kJpeg) {
      const auto spec = DistortionSpec::at_level(DistortionKind::kJpeg, s.provenance.level);
      out += ",\"codec\":\"ijg-baseline-420\",\"jpeg_quality\":" + std::to_string(*spec.quality);
    }
    out += "}\n";
  }
  return out;
}

inline void write_manifest(const std::filesystem::path& path, std::span<const LabeledSample> samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write manifest " + path.string());
  out << manifest_lines(samples);
}

}  // namespace iqals

#endif  // IQALS_DATASET_HPP
