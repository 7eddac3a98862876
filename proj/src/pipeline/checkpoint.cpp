#include "afg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <zlib.h>

#include "afg/config.hpp"
#include "afg/errors.hpp"

namespace afg {

using nlohmann::json;

namespace {

constexpr const char* kFormatName = "afg-checkpoint";

static_assert(sizeof(Real) == 8, "checkpoint payload stores float64");

void append_le(std::string& out, std::span<const Real> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * 8);
  char* dst = out.data() + start;
  for (Real x : values) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) *dst++ = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
}

std::vector<Real> read_le(std::string_view payload, std::size_t offset, std::size_t count) {
  std::vector<Real> out(count);
  const auto* src = reinterpret_cast<const unsigned char*>(payload.data() + offset);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(src[i * 8 + b]) << (8 * b);
    out[i] = std::bit_cast<Real>(bits);
  }
  return out;
}

std::uint32_t crc(std::string_view bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
    const std::size_t n = std::min(kChunk, bytes.size() - off);
    c = crc32(c, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(c);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto& entries = ckpt.params.entries();
  if (ckpt.optimizer.m.size() != entries.size() || ckpt.optimizer.v.size() != entries.size()) {
    throw CheckpointError("optimizer state does not cover every parameter");
  }
  std::string payload;
  json arrays = json::array();
  const auto add = [&](const std::string& name, const Shape& shape, std::span<const Real> values) {
    if (shape_numel(shape) != values.size()) throw CheckpointError("array " + name + " does not match its shape");
    arrays.push_back({{"name", name}, {"shape", shape}, {"offset", payload.size()}, {"count", values.size()}});
    append_le(payload, values);
  };
  for (const auto& e : entries) add("param/" + e.name, e.value.shape(), e.value.data());
  for (std::size_t i = 0; i < entries.size(); ++i) add("adam_m/" + entries[i].name, entries[i].value.shape(), ckpt.optimizer.m[i]);
  for (std::size_t i = 0; i < entries.size(); ++i) add("adam_v/" + entries[i].name, entries[i].value.shape(), ckpt.optimizer.v[i]);

  json provenance = json::array();
  for (const auto& r : ckpt.provenance) provenance.push_back({{"stage", r.stage}, {"epochs", r.epochs}});
  json vocab(ckpt.vocab.tokens());
  json manifest{{"format", kFormatName},
                {"version", kCheckpointVersion},
                {"config", to_json(ckpt.config)},
                {"vocab", std::move(vocab)},
                {"provenance", std::move(provenance)},
                {"optimizer_step", ckpt.optimizer.step},
                {"arrays", std::move(arrays)},
                {"payload_bytes", payload.size()},
                {"checksum", crc(payload)}};
  return manifest.dump() + "\n" + payload;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  const std::size_t newline = bytes.find('\n');
  if (newline == std::string_view::npos) throw CheckpointError("checkpoint has no manifest line");
  json manifest;
  try {
    manifest = json::parse(bytes.substr(0, newline));
  } catch (const json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint manifest is corrupt: ") + e.what());
  }
  try {
    if (manifest.at("format").get<std::string>() != kFormatName) throw CheckpointError("not an afg checkpoint");
    const int version = manifest.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    const std::string_view payload = bytes.substr(newline + 1);
    const auto expected_bytes = manifest.at("payload_bytes").get<std::size_t>();
    if (payload.size() != expected_bytes) {
      throw CheckpointError("checksum error: payload holds " + std::to_string(payload.size()) + " bytes, manifest " +
                            "declares " + std::to_string(expected_bytes) + " (truncated or padded file)");
    }
    if (crc(payload) != manifest.at("checksum").get<std::uint32_t>()) {
      throw CheckpointError("checksum error: checkpoint payload is corrupt");
    }

    Checkpoint ckpt;
    ckpt.config = model_config_from_json(manifest.at("config"));
    const auto tokens = manifest.at("vocab").get<std::vector<std::string>>();
    Vocab parsed_vocab;
    if (tokens.size() < kNumSpecials) throw CheckpointError("checkpoint vocabulary lacks special tokens");
    parsed_vocab = Vocab(std::vector<std::string>(tokens.begin() + kNumSpecials, tokens.end()));
    if (parsed_vocab.tokens() != tokens) throw CheckpointError("checkpoint vocabulary has wrong special tokens");
    ckpt.vocab = std::move(parsed_vocab);
    for (const auto& r : manifest.at("provenance")) {
      ckpt.provenance.push_back({r.at("stage").get<std::string>(), r.at("epochs").get<std::size_t>()});
    }
    ckpt.optimizer.step = manifest.at("optimizer_step").get<std::uint64_t>();

    for (const auto& a : manifest.at("arrays")) {
      const auto name = a.at("name").get<std::string>();
      const auto shape = a.at("shape").get<Shape>();
      const auto offset = a.at("offset").get<std::size_t>();
      const auto count = a.at("count").get<std::size_t>();
      if (count != shape_numel(shape) || offset > payload.size() || count * 8 > payload.size() - offset) {
        throw CheckpointError("array " + name + " lies outside the payload");
      }
      std::vector<Real> values = read_le(payload, offset, count);
      if (name.rfind("param/", 0) == 0) {
        ckpt.params.add(name.substr(6), Tensor::from(shape, std::move(values), true));
      } else if (name.rfind("adam_m/", 0) == 0) {
        ckpt.optimizer.m.push_back(std::move(values));
      } else if (name.rfind("adam_v/", 0) == 0) {
        ckpt.optimizer.v.push_back(std::move(values));
      } else {
        throw CheckpointError("unknown checkpoint array " + name);
      }
    }
    if (ckpt.optimizer.m.size() != ckpt.params.size() || ckpt.optimizer.v.size() != ckpt.params.size()) {
      throw CheckpointError("checkpoint optimizer state does not cover every parameter");
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint manifest is malformed: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint model config is invalid: ") + e.what());
  } catch (const DataError& e) {
    throw CheckpointError(std::string("checkpoint vocabulary is invalid: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

void check_compatible(const ModelParams& params, const ModelConfig& cfg) {
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("model config is invalid: ") + e.what());
  }
  const ModelParams expected = init_model(cfg, 0);
  if (expected.size() != params.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(params.size()) + " parameter arrays, model config expects " +
                          std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& want = expected.entries()[i];
    const auto& got = params.entries()[i];
    if (want.name != got.name) {
      throw CheckpointError("checkpoint parameter " + std::to_string(i) + " is " + got.name + ", model config expects " +
                            want.name);
    }
    if (want.value.shape() != got.value.shape()) {
      throw CheckpointError("checkpoint parameter " + got.name + " has shape " + shape_str(got.value.shape()) +
                            ", model config expects " + shape_str(want.value.shape()));
    }
  }
}

}  // namespace afg
