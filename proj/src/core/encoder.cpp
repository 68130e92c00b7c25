#include "core/encoder.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "core/common.hpp"
#include "core/lora.hpp"

namespace efsa {

namespace {

constexpr char kEncoderMagic[] = {'E', 'F', 'S', 'A', 'E', 'N', 'C'};
constexpr std::uint32_t kEncoderVersion = 1;

void check_layer_chain(const std::vector<LinearLayer>& layers, const std::string& what) {
  if (layers.empty()) fail(ErrorKind::shape, what + ": encoder needs at least one layer");
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (layers[i + 1].cols != layers[i].rows)
      fail(ErrorKind::shape, what + ": layer " + std::to_string(i + 1) +
                                 " expects " + std::to_string(layers[i + 1].cols) +
                                 " inputs but layer " + std::to_string(i) + " emits " +
                                 std::to_string(layers[i].rows));
  }
}

}  // namespace

std::int64_t EncoderParams::d_in() const { return layers.front().cols; }

std::int64_t EncoderParams::d_e() const { return layers.back().rows; }

std::vector<Tensor> EncoderParams::parameters() const {
  std::vector<Tensor> out;
  out.reserve(layers.size() * 2);
  for (const auto& l : layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

void EncoderParams::set_requires_grad(bool v) {
  for (auto& l : layers) {
    l.weight.set_requires_grad(v);
    l.bias.set_requires_grad(v);
  }
}

EncoderParams EncoderParams::clone(bool requires_grad) const {
  EncoderParams out;
  out.nonlinearity = nonlinearity;
  out.layers.reserve(layers.size());
  for (const auto& l : layers) {
    LinearLayer c;
    c.rows = l.rows;
    c.cols = l.cols;
    c.weight = Tensor::from_data(l.weight.shape(),
                                 {l.weight.data().begin(), l.weight.data().end()}, requires_grad);
    c.bias = Tensor::from_data(l.bias.shape(), {l.bias.data().begin(), l.bias.data().end()},
                               requires_grad);
    out.layers.push_back(std::move(c));
  }
  return out;
}

FeatureVector featurize_text(std::string_view text, std::int64_t d_in) {
  if (d_in <= 0) fail(ErrorKind::config, "featurize_text: d_in must be positive");
  FeatureVector fv;
  fv.source = FeatureSource::text_hashed;
  fv.values.assign(static_cast<std::size_t>(d_in), 0.0f);

  bool any_token = false;
  std::uint64_t h = kFnvOffset;
  bool in_token = false;
  auto flush = [&]() {
    if (!in_token) return;
    auto bucket = h % static_cast<std::uint64_t>(d_in);
    fv.values[static_cast<std::size_t>(bucket)] += 1.0f;
    any_token = true;
    in_token = false;
    h = kFnvOffset;
  };
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (alnum) {
      unsigned char lc = (c >= 'A' && c <= 'Z') ? static_cast<unsigned char>(c - 'A' + 'a') : c;
      h ^= static_cast<std::uint64_t>(lc);
      h *= kFnvPrime;
      in_token = true;
    } else {
      flush();
    }
  }
  flush();

  if (!any_token) {
    fv.degenerate = true;
    return fv;
  }
  double ss = 0.0;
  for (float v : fv.values) ss += static_cast<double>(v) * static_cast<double>(v);
  double norm = std::sqrt(ss);
  for (float& v : fv.values) v = static_cast<float>(static_cast<double>(v) / norm);
  return fv;
}

EncoderParams init_encoder(std::uint64_t seed, const EncoderDims& dims, Nonlinearity nl) {
  if (dims.d_in <= 0 || dims.d_e <= 0 || dims.d_hidden < 0)
    fail(ErrorKind::config, "init_encoder: dimensions must be positive");
  std::vector<std::pair<std::int64_t, std::int64_t>> shapes;
  if (dims.d_hidden > 0) {
    shapes.emplace_back(dims.d_hidden, dims.d_in);
    shapes.emplace_back(dims.d_e, dims.d_hidden);
  } else {
    shapes.emplace_back(dims.d_e, dims.d_in);
  }

  Rng rng(seed);
  EncoderParams params;
  params.nonlinearity = nl;
  for (auto [rows, cols] : shapes) {
    double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::vector<double> w(static_cast<std::size_t>(rows * cols));
    for (auto& x : w) x = rng.uniform(-bound, bound);
    LinearLayer layer;
    layer.rows = rows;
    layer.cols = cols;
    layer.weight = Tensor::from_data({rows, cols}, std::move(w));
    layer.bias = Tensor::zeros({rows});
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Tensor encode_forward(const EncoderParams& params, const Tensor& x, const AdapterSet* adapters) {
  check_layer_chain(params.layers, "encode");
  if (x.shape().size() != 2 || x.cols() != params.d_in())
    fail(ErrorKind::shape, "encode: input width " + std::to_string(x.cols()) +
                               " does not match d_in " + std::to_string(params.d_in()));
  if (adapters && adapters->size() != params.layers.size())
    fail(ErrorKind::shape, "encode: adapter count does not match layer count");

  Tensor h = x;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const LinearLayer& l = params.layers[i];
    Tensor w = adapters ? effective_weight(l.weight, adapters->at(i), adapters->config())
                        : l.weight;
    h = linear(h, w, l.bias);
    if (i + 1 < params.layers.size()) {
      h = params.nonlinearity == Nonlinearity::tanh ? tanh(h) : relu(h);
    }
  }
  return l2_normalize_rows(h);
}

Embedding encode(const EncoderParams& params, const FeatureVector& input,
                 const AdapterSet* adapters) {
  if (input.source == FeatureSource::imported) {
    if (static_cast<std::int64_t>(input.values.size()) != params.d_e())
      fail(ErrorKind::shape, "encode: imported embedding has dimension " +
                                 std::to_string(input.values.size()) + ", expected d_e " +
                                 std::to_string(params.d_e()));
    double ss = 0.0;
    for (float v : input.values) ss += static_cast<double>(v) * static_cast<double>(v);
    double norm = std::sqrt(ss);
    if (!(norm > kNormEpsilon))
      fail(ErrorKind::degenerate, "encode: imported embedding has near-zero norm");
    Embedding out(input.values.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = static_cast<float>(static_cast<double>(input.values[i]) / norm);
    return out;
  }

  if (static_cast<std::int64_t>(input.values.size()) != params.d_in())
    fail(ErrorKind::shape, "encode: feature vector has dimension " +
                               std::to_string(input.values.size()) + ", expected d_in " +
                               std::to_string(params.d_in()));
  std::vector<double> row(input.values.begin(), input.values.end());
  Tensor x = Tensor::from_data({1, params.d_in()}, std::move(row));
  Tensor y = encode_forward(params, x, adapters);
  Embedding out(static_cast<std::size_t>(params.d_e()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(y.data()[i]);
  return out;
}

std::vector<float> encode_batch(const EncoderParams& params, const float* features,
                                std::int64_t n, const AdapterSet* adapters, int threads) {
  check_layer_chain(params.layers, "encode_batch");
  std::int64_t d_in = params.d_in();
  std::int64_t d_e = params.d_e();
  std::vector<float> out(static_cast<std::size_t>(n * d_e));

  // Materialize adapted weights once so each chunk shares identical inputs.
  std::vector<Tensor> weights;
  weights.reserve(params.layers.size());
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    weights.push_back(adapters
                          ? effective_weight(params.layers[i].weight, adapters->at(i),
                                             adapters->config())
                          : params.layers[i].weight);
  }

  parallel_for(n, threads, 512, [&](std::int64_t lo, std::int64_t hi) {
    std::int64_t rows = hi - lo;
    std::vector<double> block(static_cast<std::size_t>(rows * d_in));
    for (std::int64_t i = 0; i < rows * d_in; ++i)
      block[static_cast<std::size_t>(i)] = features[lo * d_in + i];
    Tensor h = Tensor::from_data({rows, d_in}, std::move(block));
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
      h = linear(h, weights[li], params.layers[li].bias);
      if (li + 1 < params.layers.size())
        h = params.nonlinearity == Nonlinearity::tanh ? tanh(h) : relu(h);
    }
    h = l2_normalize_rows(h);
    const double* src = h.data().data();
    for (std::int64_t i = 0; i < rows * d_e; ++i)
      out[static_cast<std::size_t>(lo * d_e + i)] = static_cast<float>(src[i]);
  });
  return out;
}

void save_encoder(const EncoderParams& params, const std::string& path) {
  check_layer_chain(params.layers, "save_encoder");
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "save_encoder: cannot open " + path);
  f.write(kEncoderMagic, sizeof(kEncoderMagic));
  auto write_u32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  write_u32(kEncoderVersion);
  write_u32(static_cast<std::uint32_t>(params.layers.size()));
  std::vector<float> buf;
  for (const auto& l : params.layers) {
    write_u32(static_cast<std::uint32_t>(l.rows));
    write_u32(static_cast<std::uint32_t>(l.cols));
    buf.resize(static_cast<std::size_t>(l.rows * l.cols));
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(l.weight.data()[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * 4));
    buf.resize(static_cast<std::size_t>(l.rows));
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(l.bias.data()[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * 4));
  }
  if (!f) fail(ErrorKind::io, "save_encoder: write failed for " + path);
}

EncoderParams load_encoder(const std::string& path, Nonlinearity nl) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::missing_artifact, "load_encoder: cannot open " + path);
  char magic[sizeof(kEncoderMagic)];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kEncoderMagic, sizeof(magic)) != 0)
    fail(ErrorKind::ingest, "load_encoder: bad magic in " + path);
  auto read_u32 = [&]() {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  std::uint32_t version = read_u32();
  if (version != kEncoderVersion)
    fail(ErrorKind::ingest, "load_encoder: unsupported version " + std::to_string(version));
  std::uint32_t n_layers = read_u32();
  if (!f || n_layers == 0 || n_layers > 64)
    fail(ErrorKind::ingest, "load_encoder: invalid layer count in " + path);

  EncoderParams params;
  params.nonlinearity = nl;
  for (std::uint32_t li = 0; li < n_layers; ++li) {
    std::int64_t rows = read_u32();
    std::int64_t cols = read_u32();
    if (!f || rows <= 0 || cols <= 0)
      fail(ErrorKind::ingest, "load_encoder: invalid layer shape in " + path);
    std::vector<float> w(static_cast<std::size_t>(rows * cols));
    f.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * 4));
    std::vector<float> b(static_cast<std::size_t>(rows));
    f.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size() * 4));
    if (!f) fail(ErrorKind::ingest, "load_encoder: truncated file " + path);
    LinearLayer layer;
    layer.rows = rows;
    layer.cols = cols;
    layer.weight = Tensor::from_data({rows, cols}, {w.begin(), w.end()});
    layer.bias = Tensor::from_data({rows}, {b.begin(), b.end()});
    params.layers.push_back(std::move(layer));
  }
  check_layer_chain(params.layers, "load_encoder");
  return params;
}

Nonlinearity nonlinearity_from_name(std::string_view name) {
  if (name == "tanh") return Nonlinearity::tanh;
  if (name == "relu") return Nonlinearity::relu;
  fail(ErrorKind::config, "unknown nonlinearity: " + std::string(name));
}

}  // namespace efsa
