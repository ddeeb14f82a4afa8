// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

// Pluggable model contract. A model declares its parameter manifest and
// activation points, computes logits and named activations in forward(), and
// returns explicit parameter gradients from backward().

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "clipstream/checkpoint.hpp"
#include "clipstream/pipeline.hpp"
#include "clipstream/tensor.hpp"

namespace clipstream {

struct ParamInfo {
  std::string name;
  std::vector<std::int64_t> shape;
  DType dtype = DType::f64;
};

struct ModelSpec {
  std::string name;
  Shape4 input_shape;
  std::int64_t num_classes = 0;
  std::vector<ParamInfo> manifest;
  std::vector<std::string> preprocess_names;
  std::vector<std::string> loss_types;
  std::vector<std::string> activation_points;

  void validate() const;
};

using ParamMap = std::map<std::string, NdArray>;

struct ModelState {
  ParamMap parameters;
  std::int64_t step = 0;

  bool operator==(const ModelState&) const = default;
};

struct ForwardResult {
  NdArray logits;  // (batch, num_classes)
  std::map<std::string, NdArray> activations;
};

struct LossResult {
  double value = 0.0;
  NdArray logit_gradient;
};

class Model {
 public:
  virtual ~Model() = default;
  virtual const ModelSpec& spec() const = 0;
  virtual ForwardResult forward(const ModelState& state, const BatchView& batch) const = 0;
  virtual ParamMap backward(const ModelState& state, const BatchView& batch,
                            const NdArray& logit_gradient) const = 0;
};

inline constexpr const char* kCrossEntropy = "cross_entropy";
inline constexpr const char* kMeanSquaredError = "mean_squared_error";

LossResult compute_loss(const NdArray& logits, std::span<const std::uint32_t> labels,
                        const std::string& loss_type, const ModelSpec& spec);

// Row-wise numerically stable softmax.
NdArray softmax_rows(const NdArray& logits);

// Throws ShapeError listing missing, extra and mis-shaped parameters.
void check_manifest(const ModelSpec& spec, const ParamMap& params);

// "zeros", "uniform:<a>" (seeded uniform(-a, a)) or a checkpoint path.
struct InitSpec {
  enum class Kind { zeros, uniform, checkpoint };
  Kind kind = Kind::zeros;
  double scale = 0.0;
  std::filesystem::path path;

  static InitSpec parse(const std::string& text);
};

ModelState load_default_weights(const ModelSpec& spec, const InitSpec& init, std::uint64_t seed);
ModelState state_from_bundle(const ModelSpec& spec, const CheckpointBundle& bundle);

// Mean over frames of each pixel, then a linear layer. Activations:
// "pooled" (batch, H*W*C) and "logits".
class MeanFrameSoftmax : public Model {
 public:
  MeanFrameSoftmax(Shape4 input_shape, std::int64_t num_classes);
  const ModelSpec& spec() const override { return spec_; }
  ForwardResult forward(const ModelState& state, const BatchView& batch) const override;
  ParamMap backward(const ModelState& state, const BatchView& batch,
                    const NdArray& logit_gradient) const override;

 private:
  ModelSpec spec_;
};

// Linear layer on the final frame only. Activations: "last_frame"
// (batch, H*W*C) and "logits".
class LastFrameSoftmax : public Model {
 public:
  LastFrameSoftmax(Shape4 input_shape, std::int64_t num_classes);
  const ModelSpec& spec() const override { return spec_; }
  ForwardResult forward(const ModelState& state, const BatchView& batch) const override;
  ParamMap backward(const ModelState& state, const BatchView& batch,
                    const NdArray& logit_gradient) const override;

 private:
  ModelSpec spec_;
};

using ModelFactory =
    std::function<std::unique_ptr<Model>(Shape4 input_shape, std::int64_t num_classes)>;

class ModelRegistry {
 public:
  void add(const std::string& name, ModelFactory factory);
  std::unique_ptr<Model> create(const std::string& name, Shape4 input_shape,
                                std::int64_t num_classes) const;
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, ModelFactory> factories_;
};

// Holds "meanframe" and "lastframe".
ModelRegistry& model_registry();

// Writes models_root/<name>/model.cpp and models_root/<name>/preprocess.json.
std::filesystem::path create_model_template(const std::string& name,
                                            const std::filesystem::path& models_root = "models");

}  // namespace clipstream
