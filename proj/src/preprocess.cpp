// Copyright 2026 The clipstream Authors.
// SPDX-License-Identifier: Apache-2.0

#include "clipstream/preprocess.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "clipstream/errors.hpp"
#include "clipstream/kernels.hpp"
#include "clipstream/rng.hpp"

namespace clipstream {

namespace {

constexpr const char* kModule = "preprocess";

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void copy_window(const Clip& src, Clip& dst, std::int64_t y0, std::int64_t x0) {
  const std::int64_t c = src.shape.c;
  const std::size_t row_bytes = static_cast<std::size_t>(dst.shape.w * c) * sizeof(double);
  for (std::int64_t t = 0; t < dst.shape.t; ++t)
    for (std::int64_t y = 0; y < dst.shape.h; ++y)
      std::memcpy(&dst.at(t, y, 0, 0), &src.at(t, y0 + y, x0, 0), row_bytes);
}

}  // namespace

std::string step_name(const Step& step) {
  return std::visit(Overloaded{[](const ResizeStep&) { return "resize"; },
                               [](const CropStep&) { return "crop"; },
                               [](const FlipStep&) { return "flip"; },
                               [](const NormalizeStep&) { return "normalize"; },
                               [](const ResampleStep&) { return "resample"; },
                               [](const ShuffleStep&) { return "shuffle"; },
                               [](const OversampleStep&) { return "oversample"; }},
                    step);
}

Clip resize_bilinear(const Clip& clip, std::int64_t out_h, std::int64_t out_w) {
  if (out_h < 1 || out_w < 1) throw ShapeError(kModule, "resize target must be at least 1x1");
  if (out_h == clip.shape.h && out_w == clip.shape.w) return clip;
  Clip out(Shape4{clip.shape.t, out_h, out_w, clip.shape.c});
  kernels::resize_bilinear(clip.data, clip.shape.t, clip.shape.h, clip.shape.w, clip.shape.c,
                           out.data, out_h, out_w);
  return out;
}

CropOffset crop_offset(std::int64_t h, std::int64_t w, CropKind kind, std::int64_t out_h,
                       std::int64_t out_w, std::uint64_t seed, int corner) {
  if (out_h < 1 || out_w < 1 || out_h > h || out_w > w)
    throw ShapeError(kModule, "crop " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                                  " does not fit a " + std::to_string(h) + "x" +
                                  std::to_string(w) + " frame");
  switch (kind) {
    case CropKind::center:
      return {(h - out_h) / 2, (w - out_w) / 2};
    case CropKind::random: {
      Rng rng(seed);
      const std::int64_t y = rng.between(0, h - out_h);
      const std::int64_t x = rng.between(0, w - out_w);
      return {y, x};
    }
    case CropKind::corner:
      if (corner < 0 || corner > 3) throw ValidationError(kModule, "corner must be in 0..3");
      return {corner >= 2 ? h - out_h : 0, (corner % 2) == 1 ? w - out_w : 0};
  }
  return {};
}

Clip crop(const Clip& clip, CropKind kind, std::int64_t out_h, std::int64_t out_w,
          std::uint64_t seed, int corner) {
  const CropOffset off = crop_offset(clip.shape.h, clip.shape.w, kind, out_h, out_w, seed, corner);
  Clip out(Shape4{clip.shape.t, out_h, out_w, clip.shape.c});
  copy_window(clip, out, off.y, off.x);
  return out;
}

Clip mirror(const Clip& clip) {
  Clip out(clip.shape);
  const std::int64_t w = clip.shape.w;
  const std::int64_t c = clip.shape.c;
  for (std::int64_t t = 0; t < clip.shape.t; ++t)
    for (std::int64_t y = 0; y < clip.shape.h; ++y)
      for (std::int64_t x = 0; x < w; ++x)
        for (std::int64_t ch = 0; ch < c; ++ch) out.at(t, y, x, ch) = clip.at(t, y, w - 1 - x, ch);
  return out;
}

Clip flip_horizontal(const Clip& clip, double probability, std::uint64_t seed) {
  if (probability < 0.0 || probability > 1.0)
    throw ValidationError(kModule, "flip probability must be in [0, 1]");
  Rng rng(seed);
  return rng.bernoulli(probability) ? mirror(clip) : clip;
}

Clip normalize(const Clip& clip, std::span<const double> per_channel_mean, double scale) {
  if (static_cast<std::int64_t>(per_channel_mean.size()) != clip.shape.c)
    throw ShapeError(kModule, "normalize mean has " + std::to_string(per_channel_mean.size()) +
                                  " entries but the clip has " + std::to_string(clip.shape.c) +
                                  " channels");
  if (!(scale > 0.0)) throw ValidationError(kModule, "normalize scale must be > 0");
  Clip out(clip.shape);
  kernels::normalize(clip.data, per_channel_mean, scale, out.data);
  return out;
}

Clip resample_temporal(const Clip& clip, std::int64_t out_t, ResampleMode mode,
                       std::int64_t stride) {
  if (out_t < 1) throw ValidationError(kModule, "resample length must be >= 1");
  if (stride < 1) throw ValidationError(kModule, "resample stride must be >= 1");
  std::vector<std::int64_t> picked;
  if (mode == ResampleMode::stride) {
    for (std::int64_t t = 0; t < clip.shape.t; t += stride) picked.push_back(t);
  } else {
    picked.resize(static_cast<std::size_t>(clip.shape.t));
    std::iota(picked.begin(), picked.end(), 0);
  }
  Clip out(Shape4{out_t, clip.shape.h, clip.shape.w, clip.shape.c});
  const std::size_t frame = static_cast<std::size_t>(clip.shape.frame_size());
  for (std::int64_t t = 0; t < out_t; ++t) {
    const std::int64_t src = picked[static_cast<std::size_t>(t) % picked.size()];
    std::memcpy(out.frame(t), clip.frame(src), frame * sizeof(double));
  }
  return out;
}

Clip shuffle_frames(const Clip& clip, std::uint64_t seed) {
  std::vector<std::int64_t> order(static_cast<std::size_t>(clip.shape.t));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);
  Clip out(clip.shape);
  const std::size_t frame = static_cast<std::size_t>(clip.shape.frame_size());
  for (std::int64_t t = 0; t < clip.shape.t; ++t)
    std::memcpy(out.frame(t), clip.frame(order[static_cast<std::size_t>(t)]), frame * sizeof(double));
  return out;
}

std::vector<Clip> oversample(const Clip& clip, std::int64_t out_h, std::int64_t out_w) {
  std::vector<Clip> out;
  out.reserve(10);
  out.push_back(crop(clip, CropKind::center, out_h, out_w));
  for (int corner = 0; corner < 4; ++corner)
    out.push_back(crop(clip, CropKind::corner, out_h, out_w, 0, corner));
  for (int i = 0; i < 5; ++i) out.push_back(mirror(out[static_cast<std::size_t>(i)]));
  return out;
}

// ---------------------------------------------------------------------------
// Pipelines

namespace {

struct PartialShape {
  std::optional<std::int64_t> t, h, w, c;
};

void check_fits(const PartialShape& s, std::int64_t out_h, std::int64_t out_w, std::size_t i,
                const char* op) {
  if (out_h < 1 || out_w < 1)
    throw CompositionError(kModule, "step " + std::to_string(i) + " (" + op +
                                        "): target size must be at least 1x1");
  if ((s.h && *s.h < out_h) || (s.w && *s.w < out_w))
    throw CompositionError(kModule, "step " + std::to_string(i) + " (" + op + "): " +
                                        std::to_string(out_h) + "x" + std::to_string(out_w) +
                                        " window does not fit incoming " +
                                        std::to_string(s.h.value_or(0)) + "x" +
                                        std::to_string(s.w.value_or(0)) + " frames");
}

void check_composition(const std::vector<Step>& steps, const Shape4& output) {
  if (output.t < 1 || output.h < 1 || output.w < 1 || output.c < 1)
    throw CompositionError(kModule, "declared output shape " + output.str() + " is not positive");
  PartialShape s;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string where = "step " + std::to_string(i) + " (" + step_name(steps[i]) + ")";
    std::visit(
        Overloaded{
            [&](const ResizeStep& r) {
              if (r.height < 1 || r.width < 1)
                throw CompositionError(kModule, where + ": target size must be at least 1x1");
              s.h = r.height;
              s.w = r.width;
            },
            [&](const CropStep& c) {
              check_fits(s, c.height, c.width, i, "crop");
              if (c.kind == CropKind::corner && (c.corner < 0 || c.corner > 3))
                throw CompositionError(kModule, where + ": corner must be in 0..3");
              s.h = c.height;
              s.w = c.width;
            },
            [&](const FlipStep& f) {
              if (f.probability < 0.0 || f.probability > 1.0)
                throw CompositionError(kModule, where + ": probability must be in [0, 1]");
            },
            [&](const NormalizeStep& n) {
              if (n.mean.empty() || !(n.scale > 0.0))
                throw CompositionError(kModule, where + ": needs a channel mean and scale > 0");
              const auto c = static_cast<std::int64_t>(n.mean.size());
              if (s.c && *s.c != c)
                throw CompositionError(kModule, where + ": mean has " + std::to_string(c) +
                                                    " entries for " + std::to_string(*s.c) +
                                                    " channels");
              s.c = c;
            },
            [&](const ResampleStep& r) {
              if (r.frames < 1 || r.stride < 1)
                throw CompositionError(kModule, where + ": frames and stride must be >= 1");
              s.t = r.frames;
            },
            [&](const ShuffleStep&) {},
            [&](const OversampleStep& o) {
              check_fits(s, o.height, o.width, i, "oversample");
              s.h = o.height;
              s.w = o.width;
            }},
        steps[i]);
  }
  auto require = [&](const std::optional<std::int64_t>& got, std::int64_t want, const char* dim) {
    if (!got)
      throw CompositionError(kModule, std::string("no step fixes the ") + dim +
                                          " dimension of the output");
    if (*got != want)
      throw CompositionError(kModule, std::string("steps produce ") + dim + "=" +
                                          std::to_string(*got) + " but the declared output has " +
                                          std::to_string(want) +
                                          (steps.empty() ? "" : " (last step: " +
                                                                    step_name(steps.back()) + ")"));
  };
  require(s.t, output.t, "frame");
  require(s.h, output.h, "height");
  require(s.w, output.w, "width");
  if (s.c && *s.c != output.c) require(s.c, output.c, "channel");
}

}  // namespace

PreprocessFn make_pipeline(std::string name, std::vector<Step> steps, Shape4 output_shape) {
  if (name.empty()) throw RegistrationError(kModule, "pipeline name must not be empty");
  check_composition(steps, output_shape);
  PreprocessFn fn;
  fn.name_ = std::move(name);
  fn.steps_ = std::move(steps);
  fn.output_shape_ = output_shape;
  return fn;
}

std::int64_t PreprocessFn::copies() const {
  std::int64_t n = 1;
  for (const auto& s : steps_)
    if (std::holds_alternative<OversampleStep>(s)) n *= 10;
  return n;
}

PreprocessFn PreprocessFn::with_training(bool training) const {
  PreprocessFn copy = *this;
  copy.is_training_ = training;
  return copy;
}

std::vector<Clip> PreprocessFn::apply(const RawClip& raw, std::uint64_t clip_seed) const {
  return apply(to_real(raw), clip_seed);
}

std::vector<Clip> PreprocessFn::apply(const Clip& clip, std::uint64_t clip_seed) const {
  std::vector<Clip> clips{clip};
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    const std::uint64_t step_seed = mix_seed(clip_seed, i);
    std::vector<Clip> next;
    next.reserve(clips.size());
    for (std::size_t k = 0; k < clips.size(); ++k) {
      const Clip& in = clips[k];
      const std::uint64_t seed = clips.size() > 1 ? mix_seed(step_seed, k) : step_seed;
      std::visit(
          Overloaded{
              [&](const ResizeStep& r) { next.push_back(resize_bilinear(in, r.height, r.width)); },
              [&](const CropStep& c) {
                const CropKind kind =
                    (c.kind == CropKind::random && !is_training_) ? CropKind::center : c.kind;
                next.push_back(crop(in, kind, c.height, c.width, seed, c.corner));
              },
              [&](const FlipStep& f) {
                next.push_back(is_training_ ? flip_horizontal(in, f.probability, seed) : in);
              },
              [&](const NormalizeStep& n) { next.push_back(normalize(in, n.mean, n.scale)); },
              [&](const ResampleStep& r) {
                next.push_back(resample_temporal(in, r.frames, r.mode, r.stride));
              },
              [&](const ShuffleStep&) {
                next.push_back(is_training_ ? shuffle_frames(in, seed) : in);
              },
              [&](const OversampleStep& o) {
                for (auto& c : oversample(in, o.height, o.width)) next.push_back(std::move(c));
              }},
          steps_[i]);
    }
    clips = std::move(next);
  }
  for (const auto& c : clips)
    if (!(c.shape == output_shape_))
      throw ShapeError(kModule, "pipeline '" + name_ + "' produced " + c.shape.str() +
                                    ", declared " + output_shape_.str());
  return clips;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json step_to_json(const Step& step) {
  return std::visit(
      Overloaded{
          [](const ResizeStep& r) -> nlohmann::json {
            return {{"op", "resize"}, {"height", r.height}, {"width", r.width}};
          },
          [](const CropStep& c) -> nlohmann::json {
            const char* kind = c.kind == CropKind::center   ? "center"
                               : c.kind == CropKind::random ? "random"
                                                            : "corner";
            nlohmann::json j = {{"op", "crop"}, {"kind", kind}, {"height", c.height}, {"width", c.width}};
            if (c.kind == CropKind::corner) j["corner"] = c.corner;
            return j;
          },
          [](const FlipStep& f) -> nlohmann::json {
            return {{"op", "flip"}, {"probability", f.probability}};
          },
          [](const NormalizeStep& n) -> nlohmann::json {
            return {{"op", "normalize"}, {"mean", n.mean}, {"scale", n.scale}};
          },
          [](const ResampleStep& r) -> nlohmann::json {
            nlohmann::json j = {{"op", "resample"},
                                {"frames", r.frames},
                                {"mode", r.mode == ResampleMode::loop ? "loop" : "stride"}};
            if (r.mode == ResampleMode::stride) j["stride"] = r.stride;
            return j;
          },
          [](const ShuffleStep&) -> nlohmann::json { return {{"op", "shuffle"}}; },
          [](const OversampleStep& o) -> nlohmann::json {
            return {{"op", "oversample"}, {"height", o.height}, {"width", o.width}};
          }},
      step);
}

Step step_from_json(const nlohmann::json& j) {
  const std::string op = j.at("op").get<std::string>();
  if (op == "resize") return ResizeStep{j.at("height").get<std::int64_t>(), j.at("width").get<std::int64_t>()};
  if (op == "crop") {
    CropStep c;
    const std::string kind = j.value("kind", "center");
    if (kind == "center") c.kind = CropKind::center;
    else if (kind == "random") c.kind = CropKind::random;
    else if (kind == "corner") c.kind = CropKind::corner;
    else throw ValidationError(kModule, "unknown crop kind '" + kind + "'");
    c.corner = j.value("corner", 0);
    c.height = j.at("height").get<std::int64_t>();
    c.width = j.at("width").get<std::int64_t>();
    return c;
  }
  if (op == "flip") return FlipStep{j.value("probability", 0.5)};
  if (op == "normalize")
    return NormalizeStep{j.at("mean").get<std::vector<double>>(), j.value("scale", 1.0)};
  if (op == "resample") {
    ResampleStep r;
    r.frames = j.at("frames").get<std::int64_t>();
    const std::string mode = j.value("mode", "loop");
    if (mode == "loop") r.mode = ResampleMode::loop;
    else if (mode == "stride") r.mode = ResampleMode::stride;
    else throw ValidationError(kModule, "unknown resample mode '" + mode + "'");
    r.stride = j.value("stride", std::int64_t{1});
    return r;
  }
  if (op == "shuffle") return ShuffleStep{};
  if (op == "oversample")
    return OversampleStep{j.at("height").get<std::int64_t>(), j.at("width").get<std::int64_t>()};
  throw ValidationError(kModule, "unknown preprocessing op '" + op + "'");
}

PreprocessFn pipeline_from(const nlohmann::json& j) {
  try {
    std::vector<Step> steps;
    for (const auto& s : j.at("steps")) steps.push_back(step_from_json(s));
    const auto shape = j.at("output_shape").get<std::vector<std::int64_t>>();
    if (shape.size() != 4) throw ValidationError(kModule, "output_shape needs 4 entries (T,H,W,C)");
    return make_pipeline(j.at("name").get<std::string>(), std::move(steps),
                         Shape4{shape[0], shape[1], shape[2], shape[3]});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, std::string("malformed pipeline description: ") + e.what());
  }
}

}  // namespace

std::string PreprocessFn::to_json() const {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : steps_) steps.push_back(step_to_json(s));
  return nlohmann::json{{"name", name_},
                        {"output_shape",
                         {output_shape_.t, output_shape_.h, output_shape_.w, output_shape_.c}},
                        {"steps", steps}}
      .dump(2);
}

PreprocessFn pipeline_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, std::string("malformed pipeline description: ") + e.what());
  }
  return pipeline_from(j);
}

// ---------------------------------------------------------------------------
// Registry

const PreprocessFn& PreprocessRegistry::compose(std::string name, std::vector<Step> steps,
                                                Shape4 output_shape) {
  return add(make_pipeline(std::move(name), std::move(steps), output_shape));
}

const PreprocessFn& PreprocessRegistry::add(PreprocessFn fn) {
  std::lock_guard lock(mutex_);
  const std::string name = fn.name();
  if (fns_.count(name)) throw RegistrationError(kModule, "pipeline '" + name + "' is already registered");
  return fns_.emplace(name, std::move(fn)).first->second;
}

PreprocessFn PreprocessRegistry::lookup(const std::string& name) const {
  std::lock_guard lock(mutex_);
  auto it = fns_.find(name);
  if (it == fns_.end()) {
    std::string known;
    for (const auto& [n, _] : fns_) known += (known.empty() ? "" : ", ") + n;
    throw NotFoundError(kModule, "no pipeline named '" + name + "' (registered: " + known + ")");
  }
  return it->second;
}

bool PreprocessRegistry::contains(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return fns_.count(name) > 0;
}

std::vector<std::string> PreprocessRegistry::names() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [n, _] : fns_) out.push_back(n);
  return out;
}

std::vector<std::string> PreprocessRegistry::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(kModule, "cannot open pipeline file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, "malformed pipeline file " + path.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("pipelines")) j = j["pipelines"];
  if (j.is_object()) j = nlohmann::json::array({j});
  std::vector<std::string> added;
  for (const auto& p : j) added.push_back(add(pipeline_from(p)).name());
  return added;
}

void register_builtin_pipelines(PreprocessRegistry& registry) {
  const Shape4 out{8, 16, 16, 3};
  // Centred on mid-grey and scaled to [-0.5, 0.5].
  const NormalizeStep unit{{127.5, 127.5, 127.5}, 1.0 / 255.0};
  registry.compose("default", {ResampleStep{8, ResampleMode::loop, 1}, ResizeStep{16, 16}, unit}, out);
  registry.compose("augment",
                   {ResampleStep{8, ResampleMode::loop, 1}, ResizeStep{18, 18},
                    CropStep{CropKind::random, 0, 16, 16}, FlipStep{0.5}, unit},
                   out);
  registry.compose("oversample",
                   {ResampleStep{8, ResampleMode::loop, 1}, ResizeStep{18, 18},
                    OversampleStep{16, 16}, unit},
                   out);
}

PreprocessRegistry& preprocess_registry() {
  static PreprocessRegistry* registry = [] {
    auto* r = new PreprocessRegistry;
    register_builtin_pipelines(*r);
    return r;
  }();
  return *registry;
}

}  // namespace clipstream
