#include <bit>
#include <charconv>
#include <cstring>
#include <map>
#include <sstream>

#include "inflect/errors.hpp"
#include "inflect/model.hpp"

namespace inflect {
namespace {

constexpr std::string_view kMagic = "INFLCKPT";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_bytes(std::string& out, std::string_view bytes) {
  put_u32(out, static_cast<std::uint32_t>(bytes.size()));
  out.append(bytes);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint is truncated");
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint32_t u32() {
    const auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
    return v;
  }

  std::string_view bytes() { return take(u32()); }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  // A count of items that each occupy at least `min_bytes` more bytes.
  std::size_t count(std::size_t min_bytes) {
    const std::size_t n = u32();
    if (n > remaining() / min_bytes) throw DataError("checkpoint is truncated");
    return n;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  auto [end, ec] = std::to_chars(buf, buf + 16, v, 16);
  return std::string(buf, end);
}

std::size_t parse_size(const std::map<std::string, std::string>& h, const std::string& key) {
  const auto it = h.find(key);
  if (it == h.end()) throw DataError("checkpoint header is missing '" + key + "'");
  std::size_t v = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("bad checkpoint header value for " + key);
  return v;
}

double parse_double(const std::map<std::string, std::string>& h, const std::string& key) {
  const auto it = h.find(key);
  if (it == h.end()) throw DataError("checkpoint header is missing '" + key + "'");
  double v = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("bad checkpoint header value for " + key);
  return v;
}

}  // namespace

std::string serialize_model(const SerializedModel& model) {
  const auto& c = model.config;
  std::ostringstream header;
  header << "embedding_dim=" << c.embedding_dim << '\n'
         << "encoder_layers=" << c.encoder_layers << '\n'
         << "decoder_layers=" << c.decoder_layers << '\n'
         << "feed_forward_dim=" << c.feed_forward_dim << '\n'
         << "attention_heads=" << c.attention_heads << '\n'
         << "copy_enabled=" << (c.copy_enabled ? 1 : 0) << '\n'
         << "vocab_size=" << c.vocab_size << '\n'
         << "max_length=" << c.max_length << '\n'
         << "dropout=" << format_double(c.dropout) << '\n'
         << "vocab_hash=" << hex64(model.vocab.hash()) << '\n'
         << "phase=" << model.metadata.phase << '\n'
         << "epoch=" << model.metadata.epoch << '\n'
         << "dev_accuracy=" << format_double(model.metadata.dev_accuracy) << '\n';

  std::string out(kMagic);
  put_u32(out, kCheckpointVersion);
  put_bytes(out, header.str());
  put_u32(out, static_cast<std::uint32_t>(model.vocab.size()));
  for (const auto& tok : model.vocab.tokens()) put_bytes(out, tok);
  if (model.names.size() != model.tensors.size()) throw DataError("tensor names and values differ in count");
  put_u32(out, static_cast<std::uint32_t>(model.tensors.size()));
  for (std::size_t i = 0; i < model.tensors.size(); ++i) {
    const auto& t = model.tensors[i];
    put_bytes(out, model.names[i]);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

SerializedModel deserialize_model(std::string_view bytes) {
  Reader in(bytes);
  if (bytes.size() < kMagic.size() || in.take(kMagic.size()) != kMagic) throw DataError("not a checkpoint file");
  const auto version = in.u32();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  std::map<std::string, std::string> header;
  {
    std::istringstream lines{std::string(in.bytes())};
    std::string line;
    while (std::getline(lines, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw DataError("malformed checkpoint header line '" + line + "'");
      header[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  SerializedModel model;
  auto& c = model.config;
  c.embedding_dim = parse_size(header, "embedding_dim");
  c.encoder_layers = parse_size(header, "encoder_layers");
  c.decoder_layers = parse_size(header, "decoder_layers");
  c.feed_forward_dim = parse_size(header, "feed_forward_dim");
  c.attention_heads = parse_size(header, "attention_heads");
  c.copy_enabled = parse_size(header, "copy_enabled") != 0;
  c.vocab_size = parse_size(header, "vocab_size");
  c.max_length = parse_size(header, "max_length");
  c.dropout = parse_double(header, "dropout");
  model.metadata.phase = header["phase"];
  model.metadata.epoch = parse_size(header, "epoch");
  model.metadata.dev_accuracy = parse_double(header, "dev_accuracy");

  std::vector<std::string> tokens(in.count(4));
  for (auto& tok : tokens) tok = std::string(in.bytes());
  model.vocab = Vocabulary::from_tokens(std::move(tokens));
  if (hex64(model.vocab.hash()) != header["vocab_hash"]) throw DataError("checkpoint vocabulary hash mismatch");
  if (model.vocab.size() != c.vocab_size) throw DataError("checkpoint vocabulary size disagrees with its config");

  const auto count = in.count(8);
  for (std::size_t i = 0; i < count; ++i) {
    model.names.emplace_back(in.bytes());
    nn::Shape shape(in.count(4));
    std::size_t elements = 1;
    for (auto& d : shape) {
      d = in.u32();
      elements *= d;
      if (elements > in.remaining() / 4) throw DataError("checkpoint is truncated");
    }
    nn::Tensor<float> t(shape);
    for (auto& v : t.data) v = std::bit_cast<float>(in.u32());
    model.tensors.push_back(std::move(t));
  }
  if (!in.done()) throw DataError("trailing bytes after checkpoint tensors");
  return model;
}

template <class Real>
SerializedModel snapshot(InflectionModel<Real>& model, CheckpointMetadata metadata) {
  SerializedModel out;
  out.config = model.config();
  out.vocab = model.vocab();
  out.metadata = std::move(metadata);
  model.parameters().visit([&](const std::string& name, nn::Var<Real>& v) {
    out.names.push_back(name);
    out.tensors.push_back(v.value().template cast<float>());
  });
  return out;
}

template <class Real>
InflectionModel<Real> restore_model(const SerializedModel& serialized) {
  auto params = init_parameters<Real>(serialized.config, 0);
  std::size_t index = 0;
  params.visit([&](const std::string& name, nn::Var<Real>& v) {
    if (index >= serialized.tensors.size()) throw DataError("checkpoint is missing tensor '" + name + "'");
    if (serialized.names[index] != name) {
      throw DataError("checkpoint tensor '" + serialized.names[index] + "' found where '" + name + "' was expected");
    }
    if (serialized.tensors[index].shape != v.shape()) {
      throw DataError("checkpoint tensor '" + name + "' has shape " + nn::to_string(serialized.tensors[index].shape) +
                      ", expected " + nn::to_string(v.shape()));
    }
    v.mutable_value() = serialized.tensors[index].template cast<Real>();
    ++index;
  });
  if (index != serialized.tensors.size()) throw DataError("checkpoint has unexpected extra tensors");
  return InflectionModel<Real>(serialized.config, serialized.vocab, std::move(params));
}

void save_model_file(const std::string& path, const SerializedModel& model) {
  write_file(path, serialize_model(model));
}

SerializedModel load_model_file(const std::string& path, std::optional<std::uint64_t> expected_vocab_hash) {
  SerializedModel model;
  try {
    model = deserialize_model(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
  if (expected_vocab_hash && model.vocab.hash() != *expected_vocab_hash) {
    throw DataError(path + ": vocabulary hash differs from the other checkpoints (incompatible ensemble)");
  }
  return model;
}

template SerializedModel snapshot(InflectionModel<float>&, CheckpointMetadata);
template SerializedModel snapshot(InflectionModel<double>&, CheckpointMetadata);
template InflectionModel<float> restore_model(const SerializedModel&);
template InflectionModel<double> restore_model(const SerializedModel&);

}  // namespace inflect
