// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

// create_model_template: writes a new model directory holding a model
// definition stub and a default preprocessing pipeline.

#include <fstream>
#include <regex>
#include <string>

#include "clipstream/errors.hpp"
#include "clipstream/model.hpp"

namespace clipstream {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "model_api";

constexpr const char* kModelTemplate = R"(// Model definition for @NAME@.
//
// Register the model once at startup with @NAME@_model::register_model(),
// then select it with --model @NAME@ and --preprocess @NAME@_default
// (load preprocess.json with --pipelines).

#include <cstdint>
#include <memory>

#include "clipstream/errors.hpp"
#include "clipstream/model.hpp"

namespace @NAME@_model {

class Model : public clipstream::Model {
 public:
  Model(clipstream::Shape4 input_shape, std::int64_t num_classes) {
    spec_.name = "@NAME@";
    spec_.input_shape = input_shape;
    spec_.num_classes = num_classes;
    // TODO: declare the parameters, e.g. {"weight", {input_shape.frame_size(), num_classes}}.
    spec_.manifest = {};
    spec_.preprocess_names = {"@NAME@_default"};
    // TODO: list any additional loss types and handle them in backward().
    spec_.loss_types = {clipstream::kCrossEntropy};
    spec_.activation_points = {"logits"};
  }

  const clipstream::ModelSpec& spec() const override { return spec_; }

  clipstream::ForwardResult forward(const clipstream::ModelState& state,
                                    const clipstream::BatchView& batch) const override {
    (void)state;
    (void)batch;
    // TODO: implement inference and return logits plus every activation point.
    throw clipstream::NotImplementedError("@NAME@", "forward() is not implemented yet");
  }

  clipstream::ParamMap backward(const clipstream::ModelState& state,
                                const clipstream::BatchView& batch,
                                const clipstream::NdArray& logit_gradient) const override {
    (void)state;
    (void)batch;
    (void)logit_gradient;
    // TODO: return the gradient of the selected loss for every parameter.
    throw clipstream::NotImplementedError("@NAME@", "backward() is not implemented yet");
  }

 private:
  clipstream::ModelSpec spec_;
};

inline void register_model() {
  clipstream::model_registry().add("@NAME@", [](clipstream::Shape4 shape, std::int64_t classes) {
    return std::make_unique<Model>(shape, classes);
  });
}

}  // namespace @NAME@_model
)";

constexpr const char* kPreprocessTemplate = R"({
  "name": "@NAME@_default",
  "output_shape": [8, 16, 16, 3],
  "steps": [
    {"op": "resample", "frames": 8, "mode": "loop"},
    {"op": "resize", "height": 16, "width": 16},
    {"op": "normalize", "mean": [0.0, 0.0, 0.0], "scale": 0.00392156862745098}
  ]
}
)";

std::string fill(std::string text, const std::string& name) {
  const std::string key = "@NAME@";
  for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + name.size()))
    text.replace(pos, key.size(), name);
  return text;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw IoError(kModule, "cannot write " + path.string());
}

}  // namespace

fs::path create_model_template(const std::string& name, const fs::path& models_root) {
  static const std::regex identifier(R"(^[A-Za-z_][A-Za-z0-9_]*$)");
  if (!std::regex_match(name, identifier))
    throw ValidationError(kModule, "model name '" + name + "' is not a valid identifier");
  const fs::path dir = models_root / name;
  if (fs::exists(dir))
    throw ConfigError(kModule, "refusing to overwrite existing model directory " + dir.string());
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(kModule, "cannot create " + dir.string());
  write_text(dir / "model.cpp", fill(kModelTemplate, name));
  write_text(dir / "preprocess.json", fill(kPreprocessTemplate, name));
  return dir;
}

}  // namespace clipstream
