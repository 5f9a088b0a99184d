#ifndef IQALS_NN_CHECKPOINT_HPP
#define IQALS_NN_CHECKPOINT_HPP

// Checkpoint container, version 1:
//
//   IQALS-CHECKPOINT 1\n
//   key value\n              (one line per header field, fixed order)
//   ...
//   tensor <name> <count>\n  (one line per tensor, declaration order)
//   end\n
//   <raw little-endian float32 parameter tensors, declaration order>
//   <velocity tensors in the same layout when optimizer_state is 1>
//
// The header is plain text and carries no timestamps, so identical runs give
// byte-identical files.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "iqals/digest.hpp"
#include "iqals/error.hpp"
#include "iqals/nn/network.hpp"
#include "iqals/rng.hpp"

namespace iqals::nn {

inline constexpr const char* kCheckpointMagic = "IQALS-CHECKPOINT 1";

struct CheckpointHeader {
  std::string architecture;
  std::string architecture_hash;
  std::string config;  // single-line key=value rendering of the run config
  std::string config_hash;
  int strategy = 0;
  std::uint64_t seed = 0;
  int epoch = 0;  // number of completed epochs
  std::string init = kInitScheme;
  std::string rng = kRngVersion;
  bool optimizer_state = false;
};

struct Checkpoint {
  CheckpointHeader header;
  ModelParams<float> params;
  ModelParams<float> velocity;  // zero-sized unless header.optimizer_state
};

namespace detail {

inline void write_f32(std::ostream& out, const std::vector<float>& v) {
  std::vector<char> buf(v.size() * 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto u = std::bit_cast<std::uint32_t>(v[i]);
    buf[4 * i + 0] = static_cast<char>(u & 0xFF);
    buf[4 * i + 1] = static_cast<char>((u >> 8) & 0xFF);
    buf[4 * i + 2] = static_cast<char>((u >> 16) & 0xFF);
    buf[4 * i + 3] = static_cast<char>((u >> 24) & 0xFF);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline void read_f32(std::istream& in, std::vector<float>& v, const std::string& what) {
  std::vector<unsigned char> buf(v.size() * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
    throw DataError("checkpoint: truncated tensor data in " + what);
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::uint32_t u = buf[4 * i] | (buf[4 * i + 1] << 8) | (buf[4 * i + 2] << 16) |
                            (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
    v[i] = std::bit_cast<float>(u);
  }
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  std::ostringstream out(std::ios::binary);
  const auto& h = ck.header;
  out << kCheckpointMagic << '\n'
      << "architecture " << ck.params.arch.describe() << '\n'
      << "architecture_hash " << hex64(ck.params.arch.hash()) << '\n'
      << "config " << h.config << '\n'
      << "config_hash " << h.config_hash << '\n'
      << "strategy " << h.strategy << '\n'
      << "seed " << h.seed << '\n'
      << "epoch " << h.epoch << '\n'
      << "init " << h.init << '\n'
      << "rng " << h.rng << '\n'
      << "optimizer_state " << (h.optimizer_state ? 1 : 0) << '\n';
  ck.params.for_each([&](const char* name, const std::vector<float>& v) {
    out << "tensor " << name << ' ' << v.size() << '\n';
  });
  out << "end\n";
  ck.params.for_each([&](const char*, const std::vector<float>& v) { detail::write_f32(out, v); });
  if (h.optimizer_state) {
    ck.velocity.for_each(
        [&](const char*, const std::vector<float>& v) { detail::write_f32(out, v); });
  }
  return out.str();
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ck);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

// Reads a checkpoint and checks it against the expected architecture.
inline Checkpoint load_checkpoint(const std::filesystem::path& path, const Architecture& arch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kCheckpointMagic) throw DataError("not a checkpoint file: " + path.string());

  std::map<std::string, std::string> fields;
  std::vector<std::pair<std::string, std::size_t>> tensors;
  while (std::getline(in, line) && line != "end") {
    const auto sp = line.find(' ');
    const std::string key = line.substr(0, sp);
    const std::string value = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (key == "tensor") {
      std::istringstream ts(value);
      std::string name;
      std::size_t count = 0;
      ts >> name >> count;
      tensors.emplace_back(name, count);
    } else {
      fields[key] = value;
    }
  }
  if (line != "end") throw DataError("checkpoint header is truncated: " + path.string());

  Checkpoint ck;
  auto& h = ck.header;
  h.architecture = fields["architecture"];
  h.architecture_hash = fields["architecture_hash"];
  if (h.architecture != arch.describe() || h.architecture_hash != hex64(arch.hash())) {
    throw ConfigError("checkpoint " + path.string() + " was written for architecture '" +
                      h.architecture + "', expected '" + arch.describe() + "'");
  }
  h.config = fields["config"];
  h.config_hash = fields["config_hash"];
  h.strategy = std::stoi(fields["strategy"]);
  h.seed = std::stoull(fields["seed"]);
  h.epoch = std::stoi(fields["epoch"]);
  h.init = fields["init"];
  h.rng = fields["rng"];
  h.optimizer_state = fields["optimizer_state"] == "1";

  ck.params = ModelParams<float>::zeros(arch);
  std::size_t t = 0;
  ck.params.for_each([&](const char* name, std::vector<float>& v) {
    if (t >= tensors.size() || tensors[t].first != name || tensors[t].second != v.size()) {
      throw ConfigError("checkpoint tensor table does not match the architecture at " +
                        std::string(name));
    }
    ++t;
  });
  ck.params.for_each(
      [&](const char* name, std::vector<float>& v) { detail::read_f32(in, v, name); });
  if (h.optimizer_state) {
    ck.velocity = ModelParams<float>::zeros(arch);
    ck.velocity.for_each(
        [&](const char* name, std::vector<float>& v) { detail::read_f32(in, v, name); });
  }
  return ck;
}

}  // namespace iqals::nn

#endif  // IQALS_NN_CHECKPOINT_HPP
