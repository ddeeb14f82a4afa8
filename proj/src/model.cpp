// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include "clipstream/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <regex>
#include <set>

#include "clipstream/errors.hpp"
#include "clipstream/kernels.hpp"
#include "clipstream/metrics.hpp"
#include "clipstream/preprocess.hpp"
#include "clipstream/rng.hpp"

namespace clipstream {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "model_api";
constexpr const char* kOptimizerPrefix = "optimizer/";

void check_input(const ModelSpec& spec, const BatchView& batch) {
  if (!(batch.clip_shape == spec.input_shape))
    throw ShapeError(kModule, spec.name + " expects clips of shape " + spec.input_shape.str() +
                                  ", got " + batch.clip_shape.str());
  if (batch.size < 1 ||
      static_cast<std::int64_t>(batch.data.size()) != batch.size * batch.clip_shape.numel())
    throw ShapeError(kModule, "batch buffer holds " + std::to_string(batch.data.size()) +
                                  " values, expected " + std::to_string(batch.size) + " clips of " +
                                  batch.clip_shape.str());
}

const NdArray& param(const ModelState& state, const std::string& name) {
  auto it = state.parameters.find(name);
  if (it == state.parameters.end()) throw ShapeError(kModule, "state has no parameter '" + name + "'");
  return it->second;
}

ModelSpec linear_spec(std::string name, Shape4 input, std::int64_t num_classes,
                      std::string feature_point) {
  if (input.t < 1 || input.h < 1 || input.w < 1 || input.c < 1)
    throw ShapeError(kModule, "input shape " + input.str() + " must be positive");
  if (num_classes < 1) throw ShapeError(kModule, "a model needs at least one class");
  ModelSpec spec;
  spec.name = std::move(name);
  spec.input_shape = input;
  spec.num_classes = num_classes;
  spec.manifest = {{"bias", {num_classes}, DType::f64},
                   {"weight", {input.frame_size(), num_classes}, DType::f64}};
  spec.preprocess_names = {"default", "augment", "oversample"};
  spec.loss_types = {kCrossEntropy, kMeanSquaredError};
  spec.activation_points = {std::move(feature_point), "logits"};
  return spec;
}

ForwardResult linear_head(const ModelSpec& spec, const ModelState& state, NdArray features,
                          const std::string& feature_name) {
  const NdArray& weight = param(state, "weight");
  const NdArray& bias = param(state, "bias");
  const std::int64_t batch = features.shape[0];
  const std::int64_t dim = features.shape[1];
  ForwardResult r;
  r.logits = NdArray({batch, spec.num_classes});
  kernels::linear_forward(features.values, weight.values, bias.values, batch, dim, spec.num_classes,
                          r.logits.values);
  r.activations.emplace("logits", r.logits);
  r.activations.emplace(feature_name, std::move(features));
  return r;
}

ParamMap linear_grads(const ModelSpec& spec, const NdArray& features, const NdArray& logit_gradient) {
  const std::int64_t batch = features.shape[0];
  const std::int64_t dim = features.shape[1];
  if (logit_gradient.shape != std::vector<std::int64_t>{batch, spec.num_classes})
    throw ShapeError(kModule, "logit gradient has shape " + shape_str(logit_gradient.shape) +
                                  ", expected " + shape_str({batch, spec.num_classes}));
  ParamMap grads;
  NdArray dw({dim, spec.num_classes});
  NdArray db({spec.num_classes});
  kernels::linear_backward(features.values, logit_gradient.values, batch, dim, spec.num_classes,
                           dw.values, db.values);
  grads.emplace("weight", std::move(dw));
  grads.emplace("bias", std::move(db));
  return grads;
}

NdArray frame_means(const ModelSpec& spec, const BatchView& batch) {
  const std::int64_t dim = spec.input_shape.frame_size();
  NdArray pooled({batch.size, dim});
  kernels::temporal_mean(batch.data, batch.size, spec.input_shape.t, dim, pooled.values);
  return pooled;
}

NdArray last_frames(const ModelSpec& spec, const BatchView& batch) {
  const std::int64_t dim = spec.input_shape.frame_size();
  const std::int64_t t = spec.input_shape.t;
  NdArray out({batch.size, dim});
  for (std::int64_t b = 0; b < batch.size; ++b)
    std::memcpy(out.values.data() + b * dim, batch.data.data() + (b * t + t - 1) * dim,
                static_cast<std::size_t>(dim) * sizeof(double));
  return out;
}

}  // namespace

void ModelSpec::validate() const {
  std::set<std::string> names;
  for (const auto& p : manifest)
    if (!names.insert(p.name).second)
      throw RegistrationError(kModule, "parameter '" + p.name + "' declared twice in " + name);
  if (preprocess_names.empty()) throw RegistrationError(kModule, name + " declares no preprocessing");
  if (loss_types.empty()) throw RegistrationError(kModule, name + " declares no loss type");
  for (const auto& p : preprocess_names) preprocess_registry().lookup(p);
}

// ---------------------------------------------------------------------------
// Losses

NdArray softmax_rows(const NdArray& logits) {
  NdArray out = logits;
  const std::int64_t rows = logits.shape[0];
  const std::int64_t k = logits.shape[1];
  for (std::int64_t b = 0; b < rows; ++b) {
    const auto row = softmax(std::span(logits.values).subspan(static_cast<std::size_t>(b * k),
                                                              static_cast<std::size_t>(k)));
    std::copy(row.begin(), row.end(), out.values.begin() + b * k);
  }
  return out;
}

LossResult compute_loss(const NdArray& logits, std::span<const std::uint32_t> labels,
                        const std::string& loss_type, const ModelSpec& spec) {
  if (std::find(spec.loss_types.begin(), spec.loss_types.end(), loss_type) == spec.loss_types.end()) {
    std::string supported;
    for (const auto& l : spec.loss_types) supported += (supported.empty() ? "" : ", ") + l;
    throw ConfigError(kModule, "loss '" + loss_type + "' is not supported by " + spec.name +
                                   " (supported: " + supported + ")");
  }
  if (logits.shape.size() != 2 || logits.shape[1] != spec.num_classes)
    throw ShapeError(kModule, "logits have shape " + shape_str(logits.shape));
  const std::int64_t batch = logits.shape[0];
  const std::int64_t k = logits.shape[1];
  if (static_cast<std::int64_t>(labels.size()) != batch)
    throw ShapeError(kModule, std::to_string(labels.size()) + " labels for a batch of " +
                                  std::to_string(batch));
  for (auto l : labels)
    if (l >= static_cast<std::uint32_t>(k))
      throw ValidationError(kModule, "label " + std::to_string(l) + " is outside " +
                                         std::to_string(k) + " classes");

  const NdArray p = softmax_rows(logits);
  LossResult r;
  r.logit_gradient = NdArray({batch, k});
  const double inv_b = 1.0 / static_cast<double>(batch);

  if (loss_type == kCrossEntropy) {
    double total = 0.0;
    for (std::int64_t b = 0; b < batch; ++b) {
      double peak = logits(b, 0);
      for (std::int64_t j = 1; j < k; ++j) peak = std::max(peak, logits(b, j));
      double sum = 0.0;
      for (std::int64_t j = 0; j < k; ++j) sum += std::exp(logits(b, j) - peak);
      total += peak + std::log(sum) - logits(b, labels[static_cast<std::size_t>(b)]);
      for (std::int64_t j = 0; j < k; ++j) {
        const double onehot = j == labels[static_cast<std::size_t>(b)] ? 1.0 : 0.0;
        r.logit_gradient(b, j) = (p(b, j) - onehot) * inv_b;
      }
    }
    r.value = total * inv_b;
    return r;
  }

  // Squared error between softmax output and one-hot target.
  double total = 0.0;
  for (std::int64_t b = 0; b < batch; ++b) {
    const auto label = static_cast<std::int64_t>(labels[static_cast<std::size_t>(b)]);
    double inner = 0.0;
    for (std::int64_t j = 0; j < k; ++j) {
      const double e = p(b, j) - (j == label ? 1.0 : 0.0);
      total += e * e;
      inner += e * p(b, j);
    }
    for (std::int64_t j = 0; j < k; ++j) {
      const double e = p(b, j) - (j == label ? 1.0 : 0.0);
      r.logit_gradient(b, j) = 2.0 * inv_b * p(b, j) * (e - inner);
    }
  }
  r.value = total * inv_b;
  return r;
}

// ---------------------------------------------------------------------------
// Parameters

void check_manifest(const ModelSpec& spec, const ParamMap& params) {
  std::vector<std::string> missing, extra, mismatched;
  std::set<std::string> declared;
  for (const auto& p : spec.manifest) {
    declared.insert(p.name);
    auto it = params.find(p.name);
    if (it == params.end()) {
      missing.push_back(p.name);
    } else if (it->second.shape != p.shape ||
               static_cast<std::int64_t>(it->second.values.size()) != it->second.numel()) {
      mismatched.push_back(p.name + " " + shape_str(it->second.shape) + " vs " + shape_str(p.shape));
    }
  }
  for (const auto& [name, _] : params)
    if (!declared.count(name)) extra.push_back(name);
  if (missing.empty() && extra.empty() && mismatched.empty()) return;
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return "[" + s + "]";
  };
  throw ShapeError(kModule, "parameters do not match the " + spec.name + " manifest: missing " +
                                join(missing) + ", extra " + join(extra) + ", shape-mismatched " +
                                join(mismatched));
}

InitSpec InitSpec::parse(const std::string& text) {
  InitSpec init;
  if (text == "zeros") return init;
  if (text.rfind("uniform:", 0) == 0) {
    init.kind = Kind::uniform;
    try {
      init.scale = std::stod(text.substr(8));
    } catch (const std::exception&) {
      throw ConfigError(kModule, "bad initializer '" + text + "'");
    }
    if (!(init.scale > 0.0)) throw ConfigError(kModule, "uniform initializer bound must be > 0");
    return init;
  }
  if (text.empty()) throw ConfigError(kModule, "empty initializer");
  init.kind = Kind::checkpoint;
  init.path = text;
  return init;
}

ModelState load_default_weights(const ModelSpec& spec, const InitSpec& init, std::uint64_t seed) {
  if (init.kind == InitSpec::Kind::checkpoint) return state_from_bundle(spec, load_checkpoint(init.path));
  ModelState state;
  Rng rng(mix_seed(seed, "init"));
  for (const auto& p : spec.manifest) {
    NdArray a(p.shape);
    if (init.kind == InitSpec::Kind::uniform)
      for (double& v : a.values) v = rng.uniform(-init.scale, init.scale);
    state.parameters.emplace(p.name, std::move(a));
  }
  return state;
}

ModelState state_from_bundle(const ModelSpec& spec, const CheckpointBundle& bundle) {
  ModelState state;
  for (const auto& [name, tensor] : bundle.tensors)
    if (name.rfind(kOptimizerPrefix, 0) != 0) state.parameters.emplace(name, tensor.to_array());
  check_manifest(spec, state.parameters);
  state.step = bundle.meta.global_step;
  return state;
}

// ---------------------------------------------------------------------------
// Reference models

MeanFrameSoftmax::MeanFrameSoftmax(Shape4 input_shape, std::int64_t num_classes)
    : spec_(linear_spec("meanframe", input_shape, num_classes, "pooled")) {}

ForwardResult MeanFrameSoftmax::forward(const ModelState& state, const BatchView& batch) const {
  check_input(spec_, batch);
  return linear_head(spec_, state, frame_means(spec_, batch), "pooled");
}

ParamMap MeanFrameSoftmax::backward(const ModelState& state, const BatchView& batch,
                                    const NdArray& logit_gradient) const {
  check_input(spec_, batch);
  check_manifest(spec_, state.parameters);
  return linear_grads(spec_, frame_means(spec_, batch), logit_gradient);
}

LastFrameSoftmax::LastFrameSoftmax(Shape4 input_shape, std::int64_t num_classes)
    : spec_(linear_spec("lastframe", input_shape, num_classes, "last_frame")) {}

ForwardResult LastFrameSoftmax::forward(const ModelState& state, const BatchView& batch) const {
  check_input(spec_, batch);
  return linear_head(spec_, state, last_frames(spec_, batch), "last_frame");
}

ParamMap LastFrameSoftmax::backward(const ModelState& state, const BatchView& batch,
                                    const NdArray& logit_gradient) const {
  check_input(spec_, batch);
  check_manifest(spec_, state.parameters);
  return linear_grads(spec_, last_frames(spec_, batch), logit_gradient);
}

// ---------------------------------------------------------------------------
// Registry

void ModelRegistry::add(const std::string& name, ModelFactory factory) {
  std::lock_guard lock(mutex_);
  if (!factories_.emplace(name, std::move(factory)).second)
    throw RegistrationError(kModule, "model '" + name + "' is already registered");
}

std::unique_ptr<Model> ModelRegistry::create(const std::string& name, Shape4 input_shape,
                                             std::int64_t num_classes) const {
  ModelFactory factory;
  {
    std::lock_guard lock(mutex_);
    auto it = factories_.find(name);
    if (it == factories_.end()) {
      std::string known;
      for (const auto& [n, _] : factories_) known += (known.empty() ? "" : ", ") + n;
      throw ConfigError(kModule, "unknown model '" + name + "' (registered: " + known + ")");
    }
    factory = it->second;
  }
  return factory(input_shape, num_classes);
}

bool ModelRegistry::contains(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return factories_.count(name) > 0;
}

std::vector<std::string> ModelRegistry::names() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [n, _] : factories_) out.push_back(n);
  return out;
}

ModelRegistry& model_registry() {
  static ModelRegistry* registry = [] {
    auto* r = new ModelRegistry;
    r->add("meanframe", [](Shape4 s, std::int64_t k) { return std::make_unique<MeanFrameSoftmax>(s, k); });
    r->add("lastframe", [](Shape4 s, std::int64_t k) { return std::make_unique<LastFrameSoftmax>(s, k); });
    return r;
  }();
  return *registry;
}

}  // namespace clipstream
