#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "agbada/errors.hpp"
#include "agbada/layers.hpp"
#include "agbada/rng.hpp"
#include "agbada/tensor.hpp"

namespace agbada {

inline const std::vector<std::string>& default_class_names() {
  static const std::vector<std::string> names{"Female", "Male"};
  return names;
}

template <typename T>
struct SequentialModel {
  std::vector<LayerNode<T>> layers;
  Shape input_shape;  // (C,H,W)
  std::vector<std::string> class_names;

  LayerNode<T>* find(const std::string& name) {
    for (auto& l : layers)
      if (l.name == name) return &l;
    return nullptr;
  }
  const LayerNode<T>* find(const std::string& name) const {
    for (const auto& l : layers)
      if (l.name == name) return &l;
    return nullptr;
  }
};

// Per-layer output shapes (batch axis excluded); validates the chain and name uniqueness.
template <typename T>
std::vector<Shape> infer_shapes(const SequentialModel<T>& model) {
  std::set<std::string> names;
  std::vector<Shape> shapes;
  Shape current = model.input_shape;
  for (const auto& layer : model.layers) {
    if (!names.insert(layer.name).second) throw ParameterError("duplicate layer name '" + layer.name + "'");
    try {
      current = output_shape(layer, current);
    } catch (const DimensionError& e) {
      throw DimensionError("layer '" + layer.name + "': " + e.what());
    }
    shapes.push_back(current);
  }
  return shapes;
}

template <typename T>
std::size_t parameter_count(const SequentialModel<T>& model) {
  std::size_t n = 0;
  for (const auto& l : model.layers) n += l.parameter_count();
  return n;
}

template <typename T>
std::size_t trainable_parameter_count(const SequentialModel<T>& model) {
  std::size_t n = 0;
  for (const auto& l : model.layers)
    if (l.trainable) n += l.parameter_count();
  return n;
}

// ---------------------------------------------------------------------------
// Builders

struct BlockSpec {
  std::size_t convs = 0;
  std::size_t width = 0;
};

inline std::vector<BlockSpec> vgg16_blocks() { return {{2, 64}, {2, 128}, {3, 256}, {3, 512}, {3, 512}}; }

// VGG-style feature extractor: per block, `convs` same-padded 3x3 ReLU convs
// then a 2x2 stride-2 max pool. Layer names follow blockB_convI / blockB_pool.
template <typename T>
SequentialModel<T> build_vgg_base(const Shape& input_shape, const std::vector<BlockSpec>& blocks) {
  if (input_shape.size() != 3 || input_shape[0] == 0) {
    throw DimensionError("input shape must be (C,H,W), got " + shape_string(input_shape));
  }
  if (blocks.empty()) throw ParameterError("at least one block is required");
  const std::size_t min_side = std::size_t{1} << blocks.size();
  if (input_shape[1] < min_side || input_shape[2] < min_side) {
    throw DimensionError("input " + shape_string(input_shape) + " too small for " + std::to_string(blocks.size()) +
                         " pooling halvings (need >= " + std::to_string(min_side) + ")");
  }
  SequentialModel<T> model;
  model.input_shape = input_shape;
  model.class_names = default_class_names();
  std::size_t channels = input_shape[0];
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].convs == 0 || blocks[b].width == 0) throw ParameterError("block sizes must be >= 1");
    const std::string prefix = "block" + std::to_string(b + 1);
    for (std::size_t i = 0; i < blocks[b].convs; ++i) {
      model.layers.push_back(
          make_conv2d<T>(prefix + "_conv" + std::to_string(i + 1), channels, blocks[b].width, 3, true));
      channels = blocks[b].width;
    }
    model.layers.push_back(make_maxpool<T>(prefix + "_pool"));
  }
  infer_shapes(model);
  return model;
}

template <typename T>
SequentialModel<T> build_vgg16_base(const Shape& input_shape) {
  return build_vgg_base<T>(input_shape, vgg16_blocks());
}

// Appends Flatten -> Dropout(rate) -> Dense(1) -> Sigmoid.
template <typename T>
SequentialModel<T> build_gender_classifier(SequentialModel<T> base, double dropout_rate) {
  const auto shapes = infer_shapes(base);
  const Shape features = shapes.empty() ? base.input_shape : shapes.back();
  if (features.size() != 3) {
    throw DimensionError("classifier base must end in a (C,H,W) feature map, got " + shape_string(features));
  }
  const std::size_t width = shape_volume(features);
  base.layers.push_back(make_flatten<T>("flatten"));
  base.layers.push_back(make_dropout<T>("dropout", dropout_rate));
  base.layers.push_back(make_dense<T>("dense", width, 1));
  base.layers.push_back(make_activation<T>("sigmoid", LayerKind::Sigmoid));
  base.class_names = default_class_names();
  return base;
}

// He-normal weights (std = sqrt(2/fan_in)), zero biases. Each layer draws from
// its own generator keyed by its position so layers initialise independently.
template <typename T>
void initialize_he(SequentialModel<T>& model, std::uint64_t seed) {
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& layer = model.layers[i];
    if (!layer.has_params()) continue;
    auto& w = layer.params.at("W");
    const std::size_t fan_in = w.size() / w.dim(0);
    Rng rng(mix_seed(seed, {i}), Stream::Init);
    w = fill_random<T>(w.shape(), Normal{0.0, std::sqrt(2.0 / static_cast<double>(fan_in))}, rng);
    layer.params.at("b").fill(T{0});
  }
}

// ---------------------------------------------------------------------------
// Freezing

struct TrainablePolicy {
  enum class Kind { All, None, LastKConvs } kind = Kind::All;
  std::size_t k = 0;

  static TrainablePolicy all() { return {Kind::All, 0}; }
  static TrainablePolicy none() { return {Kind::None, 0}; }
  static TrainablePolicy last_k_convs(std::size_t k) { return {Kind::LastKConvs, k}; }
};

// Conv layers follow the policy; dense (head) layers stay trainable.
template <typename T>
void set_trainable(SequentialModel<T>& model, TrainablePolicy policy) {
  std::size_t convs = 0;
  for (const auto& l : model.layers)
    if (l.kind == LayerKind::Conv2D) ++convs;
  if (policy.kind == TrainablePolicy::Kind::LastKConvs && policy.k > convs) {
    throw ParameterError("cannot unfreeze " + std::to_string(policy.k) + " conv layers; model has " +
                         std::to_string(convs));
  }
  std::size_t seen = 0;
  for (auto& l : model.layers) {
    if (l.kind == LayerKind::Conv2D) {
      ++seen;
      switch (policy.kind) {
        case TrainablePolicy::Kind::All: l.trainable = true; break;
        case TrainablePolicy::Kind::None: l.trainable = false; break;
        case TrainablePolicy::Kind::LastKConvs: l.trainable = seen + policy.k > convs; break;
      }
    } else {
      l.trainable = true;
    }
    if (!l.trainable) l.grads.clear();
  }
}

// ---------------------------------------------------------------------------
// Forward / backward

// Index of the first layer whose parameters are trainable (layers.size() if none).
template <typename T>
std::size_t first_trainable_index(const SequentialModel<T>& model) {
  for (std::size_t i = 0; i < model.layers.size(); ++i)
    if (model.layers[i].trainable && model.layers[i].has_params()) return i;
  return model.layers.size();
}

template <typename T>
Tensor<T> forward(SequentialModel<T>& model, const Tensor<T>& x, Mode mode, Rng* rng = nullptr) {
  if (x.rank() != 4 || Shape(x.shape().begin() + 1, x.shape().end()) != model.input_shape) {
    throw DimensionError("model input must be (N," + shape_string(model.input_shape).substr(1) + ", got " +
                         shape_string(x.shape()));
  }
  // Layers below the first trainable one never receive a backward pass.
  const std::size_t cache_from = mode == Mode::Train ? first_trainable_index(model) : model.layers.size();
  Tensor<T> h = x;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& layer = model.layers[i];
    try {
      h = layer_forward(layer, h, mode, rng, i >= cache_from);
    } catch (const DimensionError& e) {
      throw DimensionError("layer '" + layer.name + "': " + e.what());
    }
  }
  return h;
}

namespace detail {

template <typename T>
void backward_range(SequentialModel<T>& model, Tensor<T> grad, std::size_t end) {
  const std::size_t stop = first_trainable_index(model);
  for (std::size_t i = end; i-- > 0;) {
    auto& layer = model.layers[i];
    if (i < stop) {
      layer.grads.clear();
      continue;
    }
    if (!layer.cache.valid) {
      throw StateError("backward without a cached train-mode forward (layer '" + layer.name + "')");
    }
    grad = layer_backward(layer, grad, i > stop);
  }
}

}  // namespace detail

// Propagates dLoss/dOutput through every layer in reverse.
template <typename T>
void backward(SequentialModel<T>& model, const Tensor<T>& dloss_doutput) {
  detail::backward_range(model, dloss_doutput, model.layers.size());
}

// Same, starting below a trailing Sigmoid: the caller supplies dLoss/dz for its input.
template <typename T>
void backward_from_logits(SequentialModel<T>& model, const Tensor<T>& dloss_dlogits) {
  if (model.layers.empty() || model.layers.back().kind != LayerKind::Sigmoid) {
    throw StateError("backward_from_logits requires a trailing sigmoid layer");
  }
  detail::backward_range(model, dloss_dlogits, model.layers.size() - 1);
}

struct Prediction {
  std::size_t class_index = 0;
  std::string label;
  double probability = 0.0;  // P(class index 1)
};

// Label is class_names[1] when p > threshold (strict), class_names[0] otherwise.
template <typename T>
std::vector<Prediction> predict(SequentialModel<T>& model, const Tensor<T>& x, double threshold = 0.5) {
  const Tensor<T> p = forward(model, x, Mode::Infer);
  std::vector<Prediction> out;
  out.reserve(p.dim(0));
  for (std::size_t i = 0; i < p.dim(0); ++i) {
    Prediction pred;
    pred.probability = static_cast<double>(p[i * p.dim(1)]);
    pred.class_index = pred.probability > threshold ? 1 : 0;
    pred.label = model.class_names.at(pred.class_index);
    out.push_back(std::move(pred));
  }
  return out;
}

// Parameter snapshot keyed "<layer>/<param>".
template <typename T>
using ParameterSet = std::map<std::string, Tensor<T>>;

template <typename T>
ParameterSet<T> snapshot(const SequentialModel<T>& model) {
  ParameterSet<T> out;
  for (const auto& l : model.layers)
    for (const auto& [pname, p] : l.params) out[l.name + "/" + pname] = p;
  return out;
}

template <typename T>
void restore(SequentialModel<T>& model, const ParameterSet<T>& params) {
  for (auto& l : model.layers)
    for (auto& [pname, p] : l.params) p = params.at(l.name + "/" + pname);
}

template <typename T>
void clear_caches(SequentialModel<T>& model) {
  for (auto& l : model.layers) l.cache.clear();
}

}  // namespace agbada
