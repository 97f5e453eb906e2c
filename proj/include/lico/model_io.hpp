#ifndef LICO_MODEL_IO_HPP_
#define LICO_MODEL_IO_HPP_

// Single-file model container:
//
//   "LCN1" | u16 version | u32 manifest bytes | manifest (JSON) | tensor blobs
//
// All integers and tensor payloads are little-endian. Tensors are laid out
// back to back in manifest order; conv weights are [D][C][K], linear weights
// [in][out]. The manifest is emitted with sorted keys so saving is
// deterministic.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "lico/decoder.hpp"
#include "lico/frontend.hpp"
#include "lico/linearizer.hpp"
#include "lico/model.hpp"
#include "lico/quant.hpp"

namespace lico {

inline constexpr char kModelMagic[4] = {'L', 'C', 'N', '1'};
inline constexpr std::uint16_t kModelFormatVersion = 1;

enum class ModelKind { kFloat, kLinear, kInt8 };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kFloat: return "float";
    case ModelKind::kLinear: return "linear";
    case ModelKind::kInt8: return "int8";
  }
  return "?";
}

struct ModelBundle {
  std::string arch = "custom";
  std::variant<LayerGraph, LinearizedNet, QuantizedNet> net;
  FrontendConfig frontend;
  DecoderConfig decoder;

  ModelKind kind() const { return static_cast<ModelKind>(net.index()); }
  std::size_t input_features() const {
    return std::visit([](const auto& n) { return n.input_features; }, net);
  }
  std::size_t n_classes() const { return std::visit([](const auto& n) { return n.n_classes(); }, net); }
};

namespace io_detail {

using nlohmann::json;

enum class DType { kF32, kI8, kI32 };

inline std::string_view dtype_name(DType t) {
  switch (t) {
    case DType::kF32: return "f32";
    case DType::kI8: return "i8";
    case DType::kI32: return "i32";
  }
  return "?";
}

inline std::size_t dtype_size(DType t) { return t == DType::kI8 ? 1 : 4; }

inline DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::kF32;
  if (s == "i8") return DType::kI8;
  if (s == "i32") return DType::kI32;
  fail(ErrorKind::kParse, "unknown dtype '" + s + "'");
}

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

class BlobWriter {
 public:
  void add(const std::string& name, const std::vector<std::size_t>& shape, std::span<const float> v) {
    begin(name, DType::kF32, shape, v.size());
    for (float f : v) put_u32(blob_, std::bit_cast<std::uint32_t>(f));
  }
  void add(const std::string& name, const std::vector<std::size_t>& shape, std::span<const std::int8_t> v) {
    begin(name, DType::kI8, shape, v.size());
    for (std::int8_t x : v) blob_.push_back(static_cast<unsigned char>(x));
  }
  void add(const std::string& name, const std::vector<std::size_t>& shape, std::span<const std::int32_t> v) {
    begin(name, DType::kI32, shape, v.size());
    for (std::int32_t x : v) put_u32(blob_, static_cast<std::uint32_t>(x));
  }

  const json& table() const noexcept { return table_; }
  const std::vector<unsigned char>& blob() const noexcept { return blob_; }

 private:
  void begin(const std::string& name, DType t, const std::vector<std::size_t>& shape, std::size_t count) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    require(n == count, ErrorKind::kShape, name + ": element count disagrees with shape");
    table_.push_back({{"name", name},
                      {"dtype", dtype_name(t)},
                      {"shape", shape},
                      {"offset", blob_.size()},
                      {"nbytes", count * dtype_size(t)}});
  }

  json table_ = json::array();
  std::vector<unsigned char> blob_;
};

struct TensorRef {
  DType dtype;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t nbytes = 0;
};

class BlobReader {
 public:
  BlobReader(const json& table, const unsigned char* data, std::size_t size) : data_(data) {
    require(table.is_array(), ErrorKind::kParse, "tensor table must be an array");
    std::size_t expected_end = 0;
    for (const auto& e : table) {
      TensorRef r;
      const auto name = e.at("name").get<std::string>();
      r.dtype = parse_dtype(e.at("dtype").get<std::string>());
      r.shape = e.at("shape").get<std::vector<std::size_t>>();
      r.offset = e.at("offset").get<std::size_t>();
      r.nbytes = e.at("nbytes").get<std::size_t>();
      std::size_t n = 1;
      for (auto d : r.shape) n *= d;
      require(n * dtype_size(r.dtype) == r.nbytes, ErrorKind::kSizeMismatch,
              name + ": shape implies " + std::to_string(n * dtype_size(r.dtype)) + " bytes, manifest declares " +
                  std::to_string(r.nbytes));
      require(r.offset == expected_end, ErrorKind::kParse, name + ": tensors must be contiguous in manifest order");
      require(r.offset + r.nbytes <= size, ErrorKind::kTruncated,
              name + ": blob ends at byte " + std::to_string(r.offset + r.nbytes) + " but only " +
                  std::to_string(size) + " bytes follow the manifest");
      expected_end = r.offset + r.nbytes;
      require(refs_.emplace(name, r).second, ErrorKind::kParse, "duplicate tensor '" + name + "'");
    }
    require(expected_end == size, ErrorKind::kSizeMismatch,
            std::to_string(size - expected_end) + " trailing bytes after the last tensor");
  }

  const TensorRef& ref(const std::string& name, DType t, const std::vector<std::size_t>& shape) const {
    auto it = refs_.find(name);
    require(it != refs_.end(), ErrorKind::kParse, "missing tensor '" + name + "'");
    require(it->second.dtype == t, ErrorKind::kParse, name + ": expected dtype " + std::string(dtype_name(t)));
    require(it->second.shape == shape, ErrorKind::kSizeMismatch, name + ": shape disagrees with layer description");
    return it->second;
  }

  std::vector<float> f32(const std::string& name, const std::vector<std::size_t>& shape) const {
    const auto& r = ref(name, DType::kF32, shape);
    std::vector<float> v(r.nbytes / 4);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::bit_cast<float>(get_u32(data_ + r.offset + 4 * i));
    return v;
  }
  std::vector<std::int8_t> i8(const std::string& name, const std::vector<std::size_t>& shape) const {
    const auto& r = ref(name, DType::kI8, shape);
    std::vector<std::int8_t> v(r.nbytes);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::int8_t>(data_[r.offset + i]);
    return v;
  }
  std::vector<std::int32_t> i32(const std::string& name, const std::vector<std::size_t>& shape) const {
    const auto& r = ref(name, DType::kI32, shape);
    std::vector<std::int32_t> v(r.nbytes / 4);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<std::int32_t>(get_u32(data_ + r.offset + 4 * i));
    return v;
  }

 private:
  const unsigned char* data_;
  std::map<std::string, TensorRef> refs_;
};

inline json quant_json(const QuantParams& p) { return {{"scale", p.scale}, {"zero_point", p.zero_point}}; }

inline QuantParams quant_from_json(const json& j) {
  QuantParams p{j.at("scale").get<double>(), j.at("zero_point").get<std::int32_t>()};
  validate(p);
  return p;
}

inline json residual_json(const std::optional<std::size_t>& r) { return r ? json(*r) : json(nullptr); }

inline std::optional<std::size_t> residual_from_json(const json& j) {
  const auto& r = j.at("residual_from");
  if (r.is_null()) return std::nullopt;
  return r.get<std::size_t>();
}

inline json frontend_json(const FrontendConfig& f, BlobWriter& blobs) {
  blobs.add("frontend.norm_mean", {f.norm_mean.size()}, f.norm_mean);
  blobs.add("frontend.norm_std", {f.norm_std.size()}, f.norm_std);
  return {{"sample_rate", f.sample_rate}, {"window_ms", f.window_ms}, {"hop_ms", f.hop_ms},
          {"n_mels", f.n_mels},           {"fmin", f.fmin},           {"fmax", f.fmax},
          {"log_floor", f.log_floor}};
}

inline FrontendConfig frontend_from_json(const json& j, const BlobReader& blobs) {
  FrontendConfig f;
  f.sample_rate = j.at("sample_rate").get<int>();
  f.window_ms = j.at("window_ms").get<double>();
  f.hop_ms = j.at("hop_ms").get<double>();
  f.n_mels = j.at("n_mels").get<std::size_t>();
  f.fmin = j.at("fmin").get<double>();
  f.fmax = j.at("fmax").get<double>();
  f.log_floor = j.at("log_floor").get<double>();
  f.norm_mean = blobs.f32("frontend.norm_mean", {f.n_mels});
  f.norm_std = blobs.f32("frontend.norm_std", {f.n_mels});
  validate(f);
  return f;
}

inline json decoder_json(const DecoderConfig& d) {
  return {{"window_steps", d.window_steps},
          {"smoothing_steps", d.smoothing_steps},
          {"keyword_ids", d.keyword_ids},
          {"threshold", d.threshold}};
}

inline DecoderConfig decoder_from_json(const json& j) {
  DecoderConfig d;
  d.window_steps = j.at("window_steps").get<std::size_t>();
  d.smoothing_steps = j.at("smoothing_steps").get<std::size_t>();
  d.keyword_ids = j.at("keyword_ids").get<std::vector<std::size_t>>();
  d.threshold = j.at("threshold").get<double>();
  return d;
}

inline void write_net(const LayerGraph& g, json& m, BlobWriter& blobs) {
  m["input_features"] = g.input_features;
  json layers = json::array();
  for (const auto& st : g.stages) {
    const auto& c = st.conv;
    blobs.add(st.name + ".weight", {c.out_channels, c.in_channels, c.kernel}, c.weights);
    blobs.add(st.name + ".bias", {c.out_channels}, c.bias);
    layers.push_back({{"name", st.name},
                      {"in_channels", c.in_channels},
                      {"out_channels", c.out_channels},
                      {"kernel", c.kernel},
                      {"stride", c.stride},
                      {"activation", to_string(c.activation)},
                      {"residual_from", residual_json(st.residual_from)}});
  }
  m["layers"] = std::move(layers);
}

inline json linear_stage_common(const std::string& name, std::size_t in_channels, std::size_t out_dim,
                                std::size_t kernel, std::size_t stride, std::size_t ring_frames,
                                Activation act, const std::optional<std::size_t>& residual) {
  return {{"name", name},
          {"in_channels", in_channels},
          {"out_channels", out_dim},
          {"kernel", kernel},
          {"stride", stride},
          {"ring_frames", ring_frames},
          {"activation", to_string(act)},
          {"residual_from", residual_json(residual)}};
}

inline void write_net(const LinearizedNet& n, json& m, BlobWriter& blobs) {
  m["input_features"] = n.input_features;
  m["chunk_size"] = n.chunk_size;
  json layers = json::array();
  for (const auto& st : n.stages) {
    const auto& l = st.linear;
    blobs.add(st.name + ".weight", {l.in_dim, l.out_dim}, l.weights);
    blobs.add(st.name + ".bias", {l.out_dim}, l.bias);
    blobs.add(st.name + ".rest", {st.in_channels}, st.rest_input);
    layers.push_back(linear_stage_common(st.name, st.in_channels, l.out_dim, st.kernel, st.stride, st.ring_frames,
                                         l.activation, st.residual_from));
  }
  m["layers"] = std::move(layers);
}

inline void write_net(const QuantizedNet& n, json& m, BlobWriter& blobs) {
  m["input_features"] = n.input_features;
  m["chunk_size"] = n.chunk_size;
  m["input_quant"] = quant_json(n.input_params);
  json layers = json::array();
  for (const auto& st : n.stages) {
    const auto& l = st.layer;
    blobs.add(st.name + ".weight", {l.in_dim, l.out_dim}, l.weights);
    blobs.add(st.name + ".bias", {l.out_dim}, l.bias);
    blobs.add(st.name + ".rest", {st.in_channels}, st.rest_input);
    json j = linear_stage_common(st.name, st.in_channels, l.out_dim, st.kernel, st.stride, st.ring_frames,
                                 l.activation, st.residual_from);
    j["weight_quant"] = quant_json(l.weight_params);
    j["in_quant"] = quant_json(l.in_params);
    j["out_quant"] = quant_json(l.out_params);
    layers.push_back(std::move(j));
  }
  m["layers"] = std::move(layers);
}

inline LayerGraph read_float_net(const json& m, const BlobReader& blobs) {
  LayerGraph g;
  g.input_features = m.at("input_features").get<std::size_t>();
  for (const auto& j : m.at("layers")) {
    Stage st;
    st.name = j.at("name").get<std::string>();
    Conv1DLayer& c = st.conv;
    c.in_channels = j.at("in_channels").get<std::size_t>();
    c.out_channels = j.at("out_channels").get<std::size_t>();
    c.kernel = j.at("kernel").get<std::size_t>();
    c.stride = j.at("stride").get<std::size_t>();
    c.activation = parse_activation(j.at("activation").get<std::string>());
    c.weights = blobs.f32(st.name + ".weight", {c.out_channels, c.in_channels, c.kernel});
    c.bias = blobs.f32(st.name + ".bias", {c.out_channels});
    st.residual_from = residual_from_json(j);
    g.stages.push_back(std::move(st));
  }
  validate(g);
  return g;
}

struct StageHeader {
  std::string name;
  std::size_t in_channels, out_dim, kernel, stride, ring_frames;
  Activation activation;
  std::optional<std::size_t> residual_from;
};

inline StageHeader read_stage_header(const json& j) {
  StageHeader h{j.at("name").get<std::string>(),
                j.at("in_channels").get<std::size_t>(),
                j.at("out_channels").get<std::size_t>(),
                j.at("kernel").get<std::size_t>(),
                j.at("stride").get<std::size_t>(),
                j.at("ring_frames").get<std::size_t>(),
                parse_activation(j.at("activation").get<std::string>()),
                residual_from_json(j)};
  require(h.in_channels >= 1 && h.out_dim >= 1 && h.kernel >= 1 && h.stride >= 1, ErrorKind::kParse,
          h.name + ": dimensions must be positive");
  require(h.ring_frames == (h.kernel > h.stride ? h.kernel - h.stride : 0), ErrorKind::kParse,
          h.name + ": ring width must be kernel - stride");
  return h;
}

inline LinearizedNet read_linear_net(const json& m, const BlobReader& blobs) {
  LinearizedNet n;
  n.input_features = m.at("input_features").get<std::size_t>();
  n.chunk_size = m.at("chunk_size").get<std::size_t>();
  std::size_t channels = n.input_features;
  for (const auto& j : m.at("layers")) {
    const StageHeader h = read_stage_header(j);
    require(h.in_channels == channels, ErrorKind::kShape, h.name + ": input channel chain broken");
    LinearStage st;
    st.name = h.name;
    st.in_channels = h.in_channels;
    st.kernel = h.kernel;
    st.stride = h.stride;
    st.ring_frames = h.ring_frames;
    st.residual_from = h.residual_from;
    st.linear.in_dim = h.in_channels * h.kernel;
    st.linear.out_dim = h.out_dim;
    st.linear.activation = h.activation;
    st.linear.weights = blobs.f32(h.name + ".weight", {st.linear.in_dim, h.out_dim});
    st.linear.bias = blobs.f32(h.name + ".bias", {h.out_dim});
    st.rest_input = blobs.f32(h.name + ".rest", {h.in_channels});
    n.stages.push_back(std::move(st));
    channels = h.out_dim;
  }
  return n;
}

inline QuantizedNet read_int8_net(const json& m, const BlobReader& blobs) {
  QuantizedNet n;
  n.input_features = m.at("input_features").get<std::size_t>();
  n.chunk_size = m.at("chunk_size").get<std::size_t>();
  n.input_params = quant_from_json(m.at("input_quant"));
  std::size_t channels = n.input_features;
  for (const auto& j : m.at("layers")) {
    const StageHeader h = read_stage_header(j);
    require(h.in_channels == channels, ErrorKind::kShape, h.name + ": input channel chain broken");
    QuantizedStage st;
    st.name = h.name;
    st.in_channels = h.in_channels;
    st.kernel = h.kernel;
    st.stride = h.stride;
    st.ring_frames = h.ring_frames;
    st.residual_from = h.residual_from;
    auto& l = st.layer;
    l.in_dim = h.in_channels * h.kernel;
    require(l.in_dim <= kMaxQuantizedInDim, ErrorKind::kParse, h.name + ": input dimension too large for int8 GEMV");
    l.out_dim = h.out_dim;
    l.activation = h.activation;
    l.weight_params = quant_from_json(j.at("weight_quant"));
    require(l.weight_params.zero_point == 0, ErrorKind::kParse, h.name + ": weight zero point must be 0");
    l.in_params = quant_from_json(j.at("in_quant"));
    l.out_params = quant_from_json(j.at("out_quant"));
    l.weights = blobs.i8(h.name + ".weight", {l.in_dim, h.out_dim});
    l.bias = blobs.i32(h.name + ".bias", {h.out_dim});
    st.rest_input = blobs.i8(h.name + ".rest", {h.in_channels});
    n.stages.push_back(std::move(st));
    channels = h.out_dim;
  }
  return n;
}

/// Checks shared by the linear and int8 forms once every stage is read.
template <typename Net>
void validate_linear_form(const Net& n) {
  require(!n.stages.empty(), ErrorKind::kParse, "model has no layers");
  require(n.chunk_size == n.stages.front().stride, ErrorKind::kNotLinearizable,
          "chunk size must equal the first layer stride");
  for (std::size_t l = 0; l < n.stages.size(); ++l) {
    const auto& st = n.stages[l];
    require(l == 0 || st.stride == 1, ErrorKind::kNotLinearizable, st.name + ": stride must be 1");
    if (st.residual_from) {
      const std::size_t r = *st.residual_from;
      require(r <= l, ErrorKind::kParse, st.name + ": residual source must precede the layer");
      const std::size_t out = l + 1 < n.stages.size() ? n.stages[l + 1].in_channels : n.n_classes();
      require(n.stages[r].in_channels == out, ErrorKind::kShape, st.name + ": residual width mismatch");
      for (std::size_t k = r; k <= l; ++k)
        require(n.stages[k].stride == 1, ErrorKind::kParse, st.name + ": residual path must have stride 1");
    }
  }
}

}  // namespace io_detail

inline std::vector<unsigned char> encode_model(const ModelBundle& model) {
  using io_detail::json;
  io_detail::BlobWriter blobs;
  json m;
  m["arch"] = model.arch;
  m["kind"] = to_string(model.kind());
  std::visit([&](const auto& n) { io_detail::write_net(n, m, blobs); }, model.net);
  m["frontend"] = io_detail::frontend_json(model.frontend, blobs);
  m["decoder"] = io_detail::decoder_json(model.decoder);
  m["tensors"] = blobs.table();
  const std::string manifest = m.dump(1);

  std::vector<unsigned char> out(std::begin(kModelMagic), std::end(kModelMagic));
  out.push_back(static_cast<unsigned char>(kModelFormatVersion & 0xff));
  out.push_back(static_cast<unsigned char>(kModelFormatVersion >> 8));
  io_detail::put_u32(out, static_cast<std::uint32_t>(manifest.size()));
  out.insert(out.end(), manifest.begin(), manifest.end());
  out.insert(out.end(), blobs.blob().begin(), blobs.blob().end());
  return out;
}

/// Parses and fully validates a model image; nothing partially loaded escapes.
inline ModelBundle decode_model(const std::vector<unsigned char>& bytes) {
  using io_detail::json;
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), kModelMagic, 4) == 0, ErrorKind::kBadMagic,
          "file does not start with LCN1");
  require(bytes.size() >= 10, ErrorKind::kTruncated, "header is incomplete");
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | bytes[5] << 8);
  require(version == kModelFormatVersion, ErrorKind::kUnsupportedVersion,
          "format version " + std::to_string(version) + ", this build reads " + std::to_string(kModelFormatVersion));
  const std::size_t manifest_len = io_detail::get_u32(bytes.data() + 6);
  require(bytes.size() - 10 >= manifest_len, ErrorKind::kTruncated, "manifest runs past end of file");
  json m;
  try {
    m = json::parse(bytes.begin() + 10, bytes.begin() + 10 + static_cast<std::ptrdiff_t>(manifest_len));
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("manifest: ") + e.what());
  }
  const std::size_t blob_start = 10 + manifest_len;
  try {
    io_detail::BlobReader blobs(m.at("tensors"), bytes.data() + blob_start, bytes.size() - blob_start);
    ModelBundle model;
    model.arch = m.at("arch").get<std::string>();
    const auto kind = m.at("kind").get<std::string>();
    if (kind == "float") {
      model.net = io_detail::read_float_net(m, blobs);
    } else if (kind == "linear") {
      auto n = io_detail::read_linear_net(m, blobs);
      io_detail::validate_linear_form(n);
      model.net = std::move(n);
    } else if (kind == "int8") {
      auto n = io_detail::read_int8_net(m, blobs);
      io_detail::validate_linear_form(n);
      model.net = std::move(n);
    } else {
      fail(ErrorKind::kParse, "unknown model kind '" + kind + "'");
    }
    model.frontend = io_detail::frontend_from_json(m.at("frontend"), blobs);
    model.decoder = io_detail::decoder_from_json(m.at("decoder"));
    require(model.frontend.n_mels == model.input_features(), ErrorKind::kShape,
            "frontend band count does not match network input");
    validate(model.decoder, model.n_classes());
    return model;
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("manifest: ") + e.what());
  }
}

inline void save_model(const ModelBundle& model, const std::string& path) {
  const auto bytes = encode_model(model);
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorKind::kIo, "write to '" + path + "' failed");
}

inline ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot open '" + path + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_model(bytes);
}

}  // namespace lico

#endif  // LICO_MODEL_IO_HPP_
