#include "vda/models.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <type_traits>

#include "vda/error.hpp"
#include "vda/rng.hpp"

namespace vda {
namespace {

using nlohmann::json;

LayerSpec conv(std::string name, std::size_t out, std::size_t stride, Activation act) {
  return {std::move(name), LayerKind::conv, out, 3, stride, act};
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::vmax_pool: return "vmax";
    case LayerKind::avg_pool: return "avgpool";
  }
  return "?";
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::maxout: return "maxout";
  }
  return "?";
}

void he_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : t.data()) v = rng.uniform(-limit, limit);
}

constexpr std::size_t kEmbedChunk = 64;

}  // namespace

std::string layer_of(const std::string& param_name) {
  return param_name.substr(0, param_name.find('.'));
}

// --- configuration -----------------------------------------------------------

NetworkConfig NetworkConfig::toy() {
  NetworkConfig c;
  c.scale = "toy";
  c.input_size = 32;
  c.feature_dim = 32;
  c.layers = {conv("conv1_1", 8, 1, Activation::relu),  conv("conv1_2", 16, 2, Activation::maxout),
              conv("conv2_1", 16, 1, Activation::relu), conv("conv2_2", 64, 2, Activation::maxout),
              {"pool", LayerKind::avg_pool, 0, 0, 0, Activation::none}};
  c.frozen_layers = {"conv2_1", "conv2_2"};
  return c;
}

NetworkConfig NetworkConfig::paper() {
  NetworkConfig c;
  c.scale = "paper";
  c.input_size = 100;
  c.feature_dim = 320;
  const std::size_t first[] = {32, 64, 96, 128, 160};
  const std::size_t second[] = {128, 256, 384, 512, 320};
  for (int s = 0; s < 5; ++s) {
    const std::string stage = "conv" + std::to_string(s + 1);
    c.layers.push_back(conv(stage + "_1", first[s], 1, Activation::relu));
    c.layers.push_back(conv(stage + "_2", second[s], 1, Activation::none));
    if (s < 4) c.layers.push_back({"vmax" + std::to_string(s + 1), LayerKind::vmax_pool, 0, 0, 0, Activation::none});
  }
  c.layers.push_back({"pool", LayerKind::avg_pool, 0, 0, 0, Activation::none});
  c.frozen_layers = {"conv5_1", "conv5_2"};
  return c;
}

std::vector<LayerShape> NetworkConfig::layer_shapes() const {
  if (input_size == 0) throw ConfigError("network: input_size must be positive");
  std::vector<LayerShape> shapes;
  std::size_t ch = 1, h = input_size, w = input_size;
  bool pooled = false;
  for (const LayerSpec& l : layers) {
    if (pooled) throw ConfigError("network: layer '" + l.name + "' follows the final pooling layer");
    switch (l.kind) {
      case LayerKind::conv: {
        if (l.out_channels == 0 || l.kernel == 0 || l.kernel % 2 == 0 || l.stride == 0) {
          throw ConfigError("network: invalid conv layer '" + l.name + "'");
        }
        h = (h - 1) / l.stride + 1;
        w = (w - 1) / l.stride + 1;
        ch = l.out_channels;
        if (l.activation == Activation::maxout) {
          if (ch % 2) throw ConfigError("network: maxout layer '" + l.name + "' needs even channels");
          ch /= 2;
        }
        break;
      }
      case LayerKind::vmax_pool:
        if (ch % 2) throw ConfigError("network: vmax layer '" + l.name + "' needs even channels");
        ch /= 2;
        h = (h + 1) / 2;
        w = (w + 1) / 2;
        break;
      case LayerKind::avg_pool:
        h = w = 1;
        pooled = true;
        break;
    }
    shapes.push_back({l.name, ch, h, w});
  }
  if (!pooled) throw ConfigError("network: the last layer must be average pooling");
  if (ch != feature_dim) {
    throw ConfigError("network: feature_dim " + std::to_string(feature_dim) +
                      " differs from final pooling output " + std::to_string(ch));
  }
  for (const std::string& f : frozen_layers) {
    const bool found = std::any_of(layers.begin(), layers.end(), [&](const LayerSpec& l) {
      return l.name == f && l.kind == LayerKind::conv;
    });
    if (!found) throw ConfigError("network: frozen layer '" + f + "' is not a convolution layer");
  }
  return shapes;
}

std::string NetworkConfig::to_json() const {
  json j;
  j["scale"] = scale;
  j["input_size"] = input_size;
  j["feature_dim"] = feature_dim;
  j["layers"] = json::array();
  for (const LayerSpec& l : layers) {
    json e = {{"name", l.name}, {"type", kind_name(l.kind)}};
    if (l.kind == LayerKind::conv) {
      e["out"] = l.out_channels;
      e["kernel"] = l.kernel;
      e["stride"] = l.stride;
      e["activation"] = activation_name(l.activation);
    }
    j["layers"].push_back(e);
  }
  j["frozen_layers"] = frozen_layers;
  return j.dump();
}

NetworkConfig NetworkConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("network config: ") + e.what());
  }
  try {
    const std::string scale = j.value("scale", std::string("toy"));
    NetworkConfig c;
    if (scale == "toy") {
      c = toy();
    } else if (scale == "paper") {
      c = paper();
    } else {
      throw ConfigError("network config: scale must be 'toy' or 'paper'");
    }
    if (j.contains("layers")) {
      c.layers.clear();
      c.frozen_layers.clear();
      for (const json& e : j.at("layers")) {
        LayerSpec l;
        l.name = e.at("name").get<std::string>();
        const std::string type = e.value("type", std::string("conv"));
        if (type == "conv") {
          l.kind = LayerKind::conv;
          l.out_channels = e.at("out").get<std::size_t>();
          l.kernel = e.value("kernel", std::size_t{3});
          l.stride = e.value("stride", std::size_t{1});
          const std::string act = e.value("activation", std::string("none"));
          if (act == "relu") l.activation = Activation::relu;
          else if (act == "maxout") l.activation = Activation::maxout;
          else if (act == "none") l.activation = Activation::none;
          else throw ConfigError("network config: unknown activation '" + act + "'");
        } else if (type == "vmax") {
          l.kind = LayerKind::vmax_pool;
        } else if (type == "avgpool") {
          l.kind = LayerKind::avg_pool;
        } else {
          throw ConfigError("network config: unknown layer type '" + type + "'");
        }
        c.layers.push_back(l);
      }
      if (!j.contains("frozen_layers")) {
        // default: the last two convolutions
        std::vector<std::string> convs;
        for (const LayerSpec& l : c.layers)
          if (l.kind == LayerKind::conv) convs.push_back(l.name);
        for (std::size_t i = convs.size() >= 2 ? convs.size() - 2 : 0; i < convs.size(); ++i)
          c.frozen_layers.push_back(convs[i]);
      }
    }
    c.input_size = j.value("input_size", c.input_size);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    if (j.contains("frozen_layers")) c.frozen_layers = j.at("frozen_layers").get<std::vector<std::string>>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("network config: ") + e.what());
  }
}

void DiscriminatorConfig::validate() const {
  if (ways != 2 && ways != 3) throw ConfigError("discriminator: ways must be 2 or 3");
  if (hidden == 0 || input_dim == 0) throw ConfigError("discriminator: sizes must be positive");
}

// --- embedding network ------------------------------------------------------

Tensor images_to_tensor(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("images_to_tensor: empty batch");
  const std::size_t w = images[0].width(), h = images[0].height();
  Tensor t(Shape{images.size(), 1, h, w});
  for (std::size_t b = 0; b < images.size(); ++b) {
    if (images[b].width() != w || images[b].height() != h) {
      throw ShapeError("images_to_tensor: image " + std::to_string(b) + " has a different size");
    }
    std::copy(images[b].pixels().begin(), images[b].pixels().end(), t.raw() + b * w * h);
  }
  return t;
}

EmbeddingNet::EmbeddingNet(NetworkConfig cfg, std::vector<Parameter> params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  std::size_t expected = 0;
  for (const LayerSpec& l : cfg_.layers) expected += l.kind == LayerKind::conv ? 2 : 0;
  if (params_.size() != expected) {
    throw ShapeError("network: expected " + std::to_string(expected) + " parameters, got " +
                     std::to_string(params_.size()));
  }
  std::size_t in_ch = 1, i = 0;
  for (const LayerSpec& l : cfg_.layers) {
    if (l.kind != LayerKind::conv) {
      if (l.kind == LayerKind::vmax_pool) in_ch /= 2;
      continue;
    }
    const Shape wshape{l.out_channels, in_ch, l.kernel, l.kernel};
    const Parameter& w = params_[i++];
    const Parameter& b = params_[i++];
    if (w.name != l.name + ".weight" || w.value.shape() != wshape) {
      throw ShapeError("network: layer '" + l.name + "' expects weight " + shape_string(wshape) +
                       ", got '" + w.name + "' " + shape_string(w.value.shape()));
    }
    if (b.name != l.name + ".bias" || b.value.shape() != Shape{l.out_channels}) {
      throw ShapeError("network: layer '" + l.name + "' has a malformed bias");
    }
    in_ch = l.activation == Activation::maxout ? l.out_channels / 2 : l.out_channels;
  }
}

EmbeddingNet EmbeddingNet::initialize(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = Rng::stream(seed, 0x1e17);
  std::vector<Parameter> params;
  std::size_t in_ch = 1;
  for (const LayerSpec& l : cfg.layers) {
    if (l.kind != LayerKind::conv) {
      if (l.kind == LayerKind::vmax_pool) in_ch /= 2;
      continue;
    }
    Parameter w{l.name + ".weight", Tensor(Shape{l.out_channels, in_ch, l.kernel, l.kernel}), true};
    he_uniform(w.value, in_ch * l.kernel * l.kernel, rng);
    params.push_back(std::move(w));
    params.push_back({l.name + ".bias", Tensor(Shape{l.out_channels}, 0.0), true});
    in_ch = l.activation == Activation::maxout ? l.out_channels / 2 : l.out_channels;
  }
  return EmbeddingNet(cfg, std::move(params));
}

template <class Self>
Var EmbeddingNet::forward_impl(Self& self, Graph& g, Var images, bool track) {
  const Tensor& x = g.value(images);
  const std::size_t n = self.cfg_.input_size;
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != n || x.dim(3) != n) {
    throw ShapeError("node '" + g.label(images) + "': network expects [B,1," + std::to_string(n) + "," +
                     std::to_string(n) + "], got " + shape_string(x.shape()));
  }
  auto leaf = [&](auto& p) {
    if constexpr (std::is_const_v<Self>) {
      (void)track;
      return g.parameter(static_cast<const Parameter&>(p));
    } else {
      return g.parameter(p, track);
    }
  };
  Var h = images;
  std::size_t i = 0;
  for (const LayerSpec& l : self.cfg_.layers) {
    switch (l.kind) {
      case LayerKind::conv: {
        Var w = leaf(self.params_[i++]);
        Var b = leaf(self.params_[i++]);
        h = g.add_bias(g.conv2d(h, w, l.stride, Padding::same, l.name), b, l.name + ".bias");
        if (l.activation == Activation::relu) h = g.relu(h, l.name + ".relu");
        if (l.activation == Activation::maxout) h = g.maxout(h, l.name + ".maxout");
        break;
      }
      case LayerKind::vmax_pool: h = g.vmax_pool(h, l.name); break;
      case LayerKind::avg_pool: h = g.global_avg_pool(h, l.name); break;
    }
  }
  return h;
}

Var EmbeddingNet::forward(Graph& g, Var images, bool track) { return forward_impl(*this, g, images, track); }
Var EmbeddingNet::forward(Graph& g, Var images) const { return forward_impl(*this, g, images, false); }

Tensor EmbeddingNet::embed_batch(std::span<const Image> images) const {
  const std::size_t K = cfg_.feature_dim;
  Tensor out(Shape{images.size(), K});
  for (std::size_t start = 0; start < images.size(); start += kEmbedChunk) {
    const std::size_t end = std::min(images.size(), start + kEmbedChunk);
    for (std::size_t b = start; b < end; ++b) {
      if (images[b].width() != cfg_.input_size || images[b].height() != cfg_.input_size) {
        throw ShapeError("embed: image " + std::to_string(b) + " is " + std::to_string(images[b].width()) + "x" +
                         std::to_string(images[b].height()) + ", network expects " +
                         std::to_string(cfg_.input_size));
      }
    }
    Graph g;
    Var x = g.constant(images_to_tensor(images.subspan(start, end - start)), "images");
    const Tensor& f = g.value(forward(g, x));
    std::copy(f.raw(), f.raw() + f.size(), out.raw() + start * K);
  }
  return out;
}

std::vector<double> EmbeddingNet::embed(const Image& img) const {
  return embed_batch(std::span<const Image>(&img, 1)).row(0);
}

std::size_t EmbeddingNet::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.trainable ? p.value.size() : 0;
  return n;
}

void EmbeddingNet::set_layer_trainable(const std::string& layer, bool trainable) {
  bool found = false;
  for (Parameter& p : params_) {
    if (layer_of(p.name) == layer) {
      p.trainable = trainable;
      found = true;
    }
  }
  if (!found) throw ConfigError("network: no layer named '" + layer + "'");
}

bool EmbeddingNet::layer_trainable(const std::string& layer) const {
  for (const Parameter& p : params_) {
    if (layer_of(p.name) == layer) return p.trainable;
  }
  throw ConfigError("network: no layer named '" + layer + "'");
}

// --- discriminator -----------------------------------------------------------

Discriminator::Discriminator(DiscriminatorConfig cfg, std::vector<Parameter> params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  const Shape expected[] = {{cfg_.input_dim, cfg_.hidden},
                            {cfg_.hidden},
                            {cfg_.hidden, static_cast<std::size_t>(cfg_.ways)},
                            {static_cast<std::size_t>(cfg_.ways)}};
  const char* names[] = {"fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias"};
  if (params_.size() != 4) throw ShapeError("discriminator: expected 4 parameters");
  for (int i = 0; i < 4; ++i) {
    if (params_[i].name != names[i] || params_[i].value.shape() != expected[i]) {
      throw ShapeError(std::string("discriminator: layer '") + names[i] + "' expects " +
                       shape_string(expected[i]) + ", got '" + params_[i].name + "' " +
                       shape_string(params_[i].value.shape()));
    }
  }
}

Discriminator Discriminator::initialize(const DiscriminatorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = Rng::stream(seed, 0xd15c);
  const auto ways = static_cast<std::size_t>(cfg.ways);
  std::vector<Parameter> params;
  params.push_back({"fc1.weight", Tensor(Shape{cfg.input_dim, cfg.hidden}), true});
  he_uniform(params.back().value, cfg.input_dim, rng);
  params.push_back({"fc1.bias", Tensor(Shape{cfg.hidden}, 0.0), true});
  params.push_back({"fc2.weight", Tensor(Shape{cfg.hidden, ways}), true});
  he_uniform(params.back().value, cfg.hidden, rng);
  params.push_back({"fc2.bias", Tensor(Shape{ways}, 0.0), true});
  return Discriminator(cfg, std::move(params));
}

Var Discriminator::logits(Graph& g, Var features, bool track) {
  const Tensor& f = g.value(features);
  if (f.rank() != 2 || f.dim(1) != cfg_.input_dim) {
    throw ShapeError("node '" + g.label(features) + "': discriminator expects [B," +
                     std::to_string(cfg_.input_dim) + "], got " + shape_string(f.shape()));
  }
  Var h = g.relu(g.linear(features, g.parameter(params_[0], track), g.parameter(params_[1], track), "fc1"), "fc1.relu");
  return g.linear(h, g.parameter(params_[2], track), g.parameter(params_[3], track), "fc2");
}

Var Discriminator::logits(Graph& g, Var features) const {
  const Tensor& f = g.value(features);
  if (f.rank() != 2 || f.dim(1) != cfg_.input_dim) {
    throw ShapeError("node '" + g.label(features) + "': discriminator expects [B," +
                     std::to_string(cfg_.input_dim) + "], got " + shape_string(f.shape()));
  }
  Var h = g.relu(g.linear(features, g.parameter(params_[0]), g.parameter(params_[1]), "fc1"), "fc1.relu");
  return g.linear(h, g.parameter(params_[2]), g.parameter(params_[3]), "fc2");
}

Tensor Discriminator::probabilities(const Tensor& features) const {
  Graph g;
  return g.value(g.softmax(logits(g, g.constant(features, "features"))));
}

std::size_t Discriminator::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

// --- builders ----------------------------------------------------------------

EmbeddingNet build_rfnet(const NetworkConfig& cfg, const std::vector<NamedTensor>& checkpoint) {
  EmbeddingNet net = EmbeddingNet::initialize(cfg, 0);
  assign_checkpoint(net.parameters(), checkpoint);
  for (Parameter& p : net.parameters()) p.trainable = false;
  return net;
}

EmbeddingNet build_vdnet(const EmbeddingNet& rfnet) {
  EmbeddingNet net = rfnet;
  for (Parameter& p : net.parameters()) {
    const std::string layer = layer_of(p.name);
    const auto& frozen = net.config().frozen_layers;
    p.trainable = std::find(frozen.begin(), frozen.end(), layer) == frozen.end();
  }
  return net;
}

Discriminator build_discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) {
  return Discriminator::initialize(cfg, seed);
}

Discriminator load_discriminator(const DiscriminatorConfig& cfg, const std::vector<NamedTensor>& checkpoint) {
  Discriminator d = Discriminator::initialize(cfg, 0);
  assign_checkpoint(d.parameters(), checkpoint);
  return d;
}

}  // namespace vda
