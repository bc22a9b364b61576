#include "memqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "memqa/config_io.hpp"
#include "memqa/error.hpp"

namespace memqa {
namespace {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

constexpr char kMagic[8] = {'M', 'E', 'M', 'Q', 'A', 'C', 'K', '1'};
constexpr std::size_t kHeader = 8 + 4 + 4;

template <typename T>
void PutLE(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T GetLE(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("checkpoint is truncated");
  unsigned char b[sizeof(T)];
  std::memcpy(b, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::uint32_t Crc(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

ojson Layout(const ParamStore& p) {
  ojson a = ojson::array();
  for (const auto& name : p) a.push_back({{"name", name}, {"shape", p.Get(name).shape()}});
  return a;
}

ParamStore ReadTensors(const json& layout, const std::string& bytes, std::size_t& pos) {
  ParamStore p;
  for (const auto& e : layout) {
    const Shape shape = e.at("shape").get<Shape>();
    Tensor t(shape);
    for (double& x : t.data()) x = GetLE<double>(bytes, pos);
    p.Add(e.at("name").get<std::string>(), std::move(t));
  }
  return p;
}

}  // namespace

std::string SerializeCheckpoint(const Checkpoint& ck) {
  ojson meta;
  meta["model"] = ToJson(ck.model);
  meta["train"] = ToJson(ck.train);
  meta["rules"] = ToJson(ck.rules);
  ojson chars = ojson::array();
  for (unsigned char c : ck.chars.chars()) chars.push_back(static_cast<int>(c));
  meta["chars"] = chars;
  meta["embeddings"] = ck.embeddings;
  meta["oov"] = ToJson(ck.oov);
  meta["adam"] = {{"lr", ck.adam.config.lr},
                  {"beta1", ck.adam.config.beta1},
                  {"beta2", ck.adam.config.beta2},
                  {"eps", ck.adam.config.eps},
                  {"step", ck.adam.step}};
  const TrainState& s = ck.state;
  meta["state"] = {{"phase", s.phase},
                   {"epoch", s.epoch},
                   {"epoch_in_phase", s.epoch_in_phase},
                   {"bad_epochs", s.bad_epochs},
                   {"best_f1", s.best_f1},
                   {"done", s.done},
                   {"rng_seed", s.rng.seed()},
                   {"rng_counter", s.rng.counter()}};
  ojson hist = ojson::array();
  for (const auto& r : ck.history) {
    hist.push_back({{"epoch", r.epoch},
                    {"phase", r.phase},
                    {"lr", r.lr},
                    {"train_loss", r.train_loss},
                    {"dev_f1", r.dev_f1},
                    {"select_f1", r.select_f1},
                    {"improved", r.improved}});
  }
  meta["history"] = hist;
  meta["tensors"] = {{"params", Layout(ck.params)},
                     {"current", Layout(ck.current)},
                     {"adam_m", Layout(ck.adam.m)},
                     {"adam_v", Layout(ck.adam.v)}};
  const std::string text = meta.dump();

  std::string body;
  PutLE<std::uint64_t>(body, text.size());
  body += text;
  for (const ParamStore* p : {&ck.params, &ck.current, &ck.adam.m, &ck.adam.v}) {
    for (const auto& name : *p) {
      for (double x : p->Get(name).data()) PutLE(body, x);
    }
  }
  std::string out(kMagic, sizeof kMagic);
  PutLE(out, kCheckpointVersion);
  PutLE(out, Crc(body.data(), body.size()));
  return out + body;
}

Checkpoint DeserializeCheckpoint(const std::string& bytes) {
  if (bytes.size() < kHeader || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  std::size_t pos = sizeof kMagic;
  const auto version = GetLE<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const auto crc = GetLE<std::uint32_t>(bytes, pos);
  if (Crc(bytes.data() + kHeader, bytes.size() - kHeader) != crc) {
    throw DataError("checkpoint checksum mismatch (file is corrupted or truncated)");
  }
  const auto len = GetLE<std::uint64_t>(bytes, pos);
  if (pos + len > bytes.size()) throw DataError("checkpoint is truncated");
  json meta;
  try {
    meta = json::parse(bytes.substr(pos, len));
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint metadata: ") + e.what());
  }
  pos += len;
  try {
    Checkpoint ck;
    ck.model = ModelConfigFromJson(meta.at("model"), {});
    ck.train = TrainConfigFromJson(meta.at("train"), {});
    ck.rules = PreprocessRulesFromJson(meta.at("rules"));
    std::string chars;
    for (const auto& c : meta.at("chars")) chars.push_back(static_cast<char>(c.get<int>()));
    ck.chars = CharVocab::FromChars(chars);
    ck.embeddings = meta.at("embeddings").get<std::string>();
    ck.oov = OovPolicyFromJson(meta.at("oov"));
    const auto& a = meta.at("adam");
    ck.adam.config = {a.at("lr").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
                      a.at("eps").get<double>()};
    ck.adam.step = a.at("step").get<std::int64_t>();
    const auto& s = meta.at("state");
    ck.state.phase = s.at("phase").get<int>();
    ck.state.epoch = s.at("epoch").get<std::size_t>();
    ck.state.epoch_in_phase = s.at("epoch_in_phase").get<std::size_t>();
    ck.state.bad_epochs = s.at("bad_epochs").get<std::size_t>();
    ck.state.best_f1 = s.at("best_f1").get<double>();
    ck.state.done = s.at("done").get<bool>();
    ck.state.rng = RngStream(s.at("rng_seed").get<std::uint64_t>(), s.at("rng_counter").get<std::uint64_t>());
    for (const auto& r : meta.at("history")) {
      ck.history.push_back({r.at("epoch").get<std::size_t>(), r.at("phase").get<int>(), r.at("lr").get<double>(),
                            r.at("train_loss").get<double>(), r.at("dev_f1").get<std::vector<double>>(),
                            r.at("select_f1").get<double>(), r.at("improved").get<bool>()});
    }
    const auto& t = meta.at("tensors");
    ck.params = ReadTensors(t.at("params"), bytes, pos);
    ck.current = ReadTensors(t.at("current"), bytes, pos);
    ck.adam.m = ReadTensors(t.at("adam_m"), bytes, pos);
    ck.adam.v = ReadTensors(t.at("adam_v"), bytes, pos);
    if (pos != bytes.size()) throw DataError("checkpoint has trailing bytes");
    return ck;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint metadata: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint metadata: ") + e.what());
  }
}

void SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = SerializeCheckpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for checkpoint '" + path.string() + "'");
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return DeserializeCheckpoint(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace memqa
