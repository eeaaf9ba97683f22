#include "echoseg/serialization.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <set>

#include "echoseg/image_io.hpp"

namespace echoseg {

static_assert(std::endian::native == std::endian::little,
              "TensorFile payloads are written with native little-endian layout");

namespace {

constexpr char kMagic[4] = {'M', 'T', 'N', 'S'};
constexpr const char* kCheckpointFormat = "echoseg-checkpoint";
constexpr int kCheckpointVersion = 1;

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }
void put_u16(std::string& out, std::uint16_t v) {
  put_u8(out, static_cast<std::uint8_t>(v & 0xff));
  put_u8(out, static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) put_u8(out, static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw FormatError("checkpoint header: bad integer for '" + key + "': '" + text + "'");
  }
  return v;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw FormatError("checkpoint header: bad number for '" + key + "': '" + text + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::uint8_t ByteReader::u8() { return static_cast<std::uint8_t>(take(1)[0]); }

std::uint16_t ByteReader::u16() {
  const auto b = take(2);
  return static_cast<std::uint16_t>(static_cast<std::uint8_t>(b[0]) |
                                    (static_cast<std::uint8_t>(b[1]) << 8));
}

std::uint32_t ByteReader::u32() {
  const auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[static_cast<std::size_t>(i)]);
  return v;
}

std::string_view ByteReader::take(std::size_t n) {
  if (bytes_.size() - pos_ < n) {
    throw FormatError("unexpected end of data at byte " + std::to_string(pos_) + " (needed " +
                      std::to_string(n) + " more)");
  }
  auto out = bytes_.substr(pos_, n);
  pos_ += n;
  return out;
}

template <typename T>
void append_tensor(std::string& out, const Tensor<T>& tensor) {
  if (tensor.rank() > 255) throw ShapeError("TensorFile supports at most 255 dims");
  out.append(kMagic, 4);
  put_u16(out, kTensorFileVersion);
  put_u8(out, static_cast<std::uint8_t>(dtype_of<T>()));
  put_u8(out, static_cast<std::uint8_t>(tensor.rank()));
  for (std::size_t d : tensor.shape()) {
    if (d > 0xffffffffu) throw ShapeError("TensorFile dims must fit in u32");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  const auto data = tensor.data();
  out.append(reinterpret_cast<const char*>(data.data()), data.size_bytes());
}

AnyTensor read_tensor(ByteReader& reader) {
  const auto magic = reader.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("bad TensorFile magic");
  const std::uint16_t version = reader.u16();
  if (version != kTensorFileVersion) {
    throw FormatError("unsupported TensorFile version " + std::to_string(version));
  }
  const std::uint8_t dtype = reader.u8();
  if (dtype > 1) throw FormatError("unknown TensorFile dtype tag " + std::to_string(dtype));
  const std::uint8_t ndim = reader.u8();
  Shape shape(ndim);
  for (auto& d : shape) {
    d = reader.u32();
    if (d == 0) throw FormatError("TensorFile dimension of size 0");
  }
  const std::size_t n = shape_numel(shape);
  auto decode = [&]<typename T>(T) -> AnyTensor {
    const auto payload = reader.take(n * sizeof(T));
    std::vector<T> data(n);
    std::memcpy(data.data(), payload.data(), payload.size());
    return Tensor<T>(std::move(shape), std::move(data));
  };
  return dtype == 0 ? decode(float{}) : decode(double{});
}

template <typename T>
std::string encode_tensor(const Tensor<T>& tensor) {
  std::string out;
  append_tensor(out, tensor);
  return out;
}

AnyTensor decode_tensor(std::string_view bytes) {
  ByteReader reader(bytes);
  AnyTensor t = read_tensor(reader);
  if (!reader.at_end()) throw FormatError("trailing bytes after TensorFile payload");
  return t;
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& tensor) {
  write_file(path, encode_tensor(tensor));
}

AnyTensor load_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

// ---------------------------------------------------------------------------
// Checkpoints

Checkpoint make_checkpoint(const UNet<float>& model, const Adam<float>* optimizer, std::size_t epoch,
                           std::map<std::string, std::string> metadata) {
  Checkpoint ckpt;
  ckpt.kind = model.kind();
  ckpt.config = model.config();
  ckpt.seed = model.seed();
  ckpt.epoch = epoch;
  for (const auto& p : model.parameters()) ckpt.parameters.emplace_back(p.name, p.variable.value());
  if (optimizer) ckpt.adam = optimizer->state();
  ckpt.metadata = std::move(metadata);
  return ckpt;
}

std::string encode_checkpoint(const Checkpoint& c) {
  std::map<std::string, std::string> header = c.metadata;
  header["format"] = kCheckpointFormat;
  header["version"] = std::to_string(kCheckpointVersion);
  header["model"] = to_string(c.kind);
  header["in_channels"] = std::to_string(c.config.in_channels);
  header["out_channels"] = std::to_string(c.config.out_channels);
  header["depth"] = std::to_string(c.config.depth);
  header["base_channels"] = std::to_string(c.config.base_channels);
  header["seed"] = std::to_string(c.seed);
  header["epoch"] = std::to_string(c.epoch);
  std::size_t entries = c.parameters.size();
  if (c.adam) {
    if (c.adam->m.size() != c.parameters.size() || c.adam->v.size() != c.parameters.size()) {
      throw IntegrityError("adam state does not match parameter list");
    }
    header["adam_step"] = std::to_string(c.adam->step);
    header["adam_lr"] = format_double(c.adam->options.lr);
    header["adam_beta1"] = format_double(c.adam->options.beta1);
    header["adam_beta2"] = format_double(c.adam->options.beta2);
    header["adam_eps"] = format_double(c.adam->options.eps);
    entries += 2 * c.parameters.size();
  }
  header["entries"] = std::to_string(entries);

  std::string out;
  // format/version lead so readers can reject foreign files early.
  out += "format=" + header["format"] + "\nversion=" + header["version"] + "\n";
  for (const auto& [k, v] : header) {
    if (k == "format" || k == "version") continue;
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ValidationError("checkpoint metadata may not contain '=' in keys or newlines");
    }
    out += k + "=" + v + "\n";
  }
  out += "\n";

  auto append_named = [&out](const std::string& name, const Tensor<float>& t) {
    if (name.size() > 0xffff) throw ValidationError("parameter name too long");
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    append_tensor(out, t);
  };
  for (const auto& [name, t] : c.parameters) append_named(name, t);
  if (c.adam) {
    for (std::size_t k = 0; k < c.parameters.size(); ++k) append_named("adam.m." + c.parameters[k].first, c.adam->m[k]);
    for (std::size_t k = 0; k < c.parameters.size(); ++k) append_named("adam.v." + c.parameters[k].first, c.adam->v[k]);
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  const std::size_t end = bytes.find("\n\n");
  if (end == std::string_view::npos) throw FormatError("checkpoint header not terminated");
  std::map<std::string, std::string> header;
  std::size_t pos = 0;
  while (pos <= end) {
    const std::size_t nl = bytes.find('\n', pos);
    const std::string line(bytes.substr(pos, nl - pos));
    pos = nl + 1;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint header line without '=': '" + line + "'");
    header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (header["format"] != kCheckpointFormat) throw FormatError("not an echoseg checkpoint (bad format tag)");
  if (header["version"] != std::to_string(kCheckpointVersion)) {
    throw FormatError("unsupported checkpoint version '" + header["version"] + "'");
  }
  auto take = [&header](const std::string& key) {
    auto it = header.find(key);
    if (it == header.end()) throw FormatError("checkpoint header missing '" + key + "'");
    std::string v = it->second;
    header.erase(it);
    return v;
  };
  header.erase("format");
  header.erase("version");

  Checkpoint c;
  try {
    c.kind = parse_model_kind(take("model"));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  c.config.in_channels = parse_u64("in_channels", take("in_channels"));
  c.config.out_channels = parse_u64("out_channels", take("out_channels"));
  c.config.depth = parse_u64("depth", take("depth"));
  c.config.base_channels = parse_u64("base_channels", take("base_channels"));
  c.seed = parse_u64("seed", take("seed"));
  c.epoch = parse_u64("epoch", take("epoch"));
  const std::size_t entries = parse_u64("entries", take("entries"));
  const bool has_adam = header.count("adam_step") != 0;
  AdamState<float> adam;
  if (has_adam) {
    adam.step = parse_u64("adam_step", take("adam_step"));
    adam.options.lr = parse_double("adam_lr", take("adam_lr"));
    adam.options.beta1 = parse_double("adam_beta1", take("adam_beta1"));
    adam.options.beta2 = parse_double("adam_beta2", take("adam_beta2"));
    adam.options.eps = parse_double("adam_eps", take("adam_eps"));
  }
  c.metadata = std::move(header);

  ByteReader reader(bytes.substr(end + 2));
  std::map<std::string, Tensor<float>> moments;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < entries; ++i) {
    const std::uint16_t len = reader.u16();
    std::string name(reader.take(len));
    if (!seen.insert(name).second) throw FormatError("duplicate checkpoint entry '" + name + "'");
    AnyTensor any = read_tensor(reader);
    auto* t = std::get_if<Tensor<float>>(&any);
    if (!t) throw FormatError("checkpoint entry '" + name + "' is not f32");
    if (name.starts_with("adam.")) {
      moments.emplace(std::move(name), std::move(*t));
    } else {
      c.parameters.emplace_back(std::move(name), std::move(*t));
    }
  }
  if (!reader.at_end()) throw FormatError("trailing bytes after last checkpoint entry");
  if (has_adam) {
    for (const auto& [name, t] : c.parameters) {
      auto m = moments.find("adam.m." + name);
      auto v = moments.find("adam.v." + name);
      if (m == moments.end() || v == moments.end()) {
        throw IntegrityError("checkpoint missing adam moments for '" + name + "'");
      }
      adam.m.push_back(m->second);
      adam.v.push_back(v->second);
    }
    c.adam = std::move(adam);
  } else if (!moments.empty()) {
    throw FormatError("checkpoint has adam moments but no adam header");
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  write_file(tmp, bytes);
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void restore_parameters(UNet<float>& model, const Checkpoint& checkpoint) {
  auto params = model.parameters();
  std::map<std::string, const Tensor<float>*> by_name;
  for (const auto& [name, t] : checkpoint.parameters) by_name[name] = &t;

  std::string missing, mismatched, unexpected;
  std::set<std::string> expected;
  for (const auto& p : params) {
    expected.insert(p.name);
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      missing += " " + p.name;
    } else if (it->second->shape() != p.variable.shape()) {
      mismatched += " " + p.name + shape_to_string(it->second->shape()) + "!=" +
                    shape_to_string(p.variable.shape());
    }
  }
  for (const auto& [name, t] : checkpoint.parameters) {
    if (!expected.count(name)) unexpected += " " + name;
  }
  if (!missing.empty() || !mismatched.empty() || !unexpected.empty()) {
    std::string msg = "checkpoint does not match model:";
    if (!missing.empty()) msg += " missing [" + missing + " ]";
    if (!mismatched.empty()) msg += " shape mismatch [" + mismatched + " ]";
    if (!unexpected.empty()) msg += " unexpected [" + unexpected + " ]";
    throw IntegrityError(msg);
  }
  for (auto& p : params) p.variable.mutable_value() = *by_name.at(p.name);
}

UNet<float> restore_model(const Checkpoint& checkpoint) {
  UNet<float> model(checkpoint.kind, checkpoint.config, checkpoint.seed);
  restore_parameters(model, checkpoint);
  return model;
}

template void append_tensor(std::string&, const Tensor<float>&);
template void append_tensor(std::string&, const Tensor<double>&);
template std::string encode_tensor(const Tensor<float>&);
template std::string encode_tensor(const Tensor<double>&);
template void save_tensor(const std::filesystem::path&, const Tensor<float>&);
template void save_tensor(const std::filesystem::path&, const Tensor<double>&);

}  // namespace echoseg
