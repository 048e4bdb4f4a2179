#include "adapterlab/adapter.hpp"

#include <filesystem>

#include "adapterlab/error.hpp"
#include "adapterlab/model.hpp"
#include "adapterlab/ops.hpp"
#include "adapterlab/rng.hpp"
#include "blob.hpp"

namespace adapterlab {

namespace fs = std::filesystem;

std::string_view role_name(AdapterRole role) {
  return role == AdapterRole::kLanguage ? "language" : "task";
}

AdapterRole parse_role(std::string_view name) {
  if (name == "language") return AdapterRole::kLanguage;
  if (name == "task") return AdapterRole::kTask;
  throw ConfigError("unknown adapter role '" + std::string(name) + "'");
}

std::size_t BottleneckSpec::resolve(std::size_t d_model) const {
  if (value == 0) throw ConfigError("adapter bottleneck value must be positive");
  if (kind == Kind::kDimension) return value;
  if (d_model % value != 0) {
    throw ConfigError("adapter reduction_factor " + std::to_string(value) + " does not divide d_model " +
                      std::to_string(d_model));
  }
  return d_model / value;
}

AdapterModule::AdapterModule(AdapterRole role, std::string tag, std::string model_signature,
                             std::size_t d_model, std::size_t bottleneck, std::uint64_t seed,
                             std::vector<AdapterLayer> layers)
    : role_(role),
      tag_(std::move(tag)),
      model_signature_(std::move(model_signature)),
      d_model_(d_model),
      bottleneck_(bottleneck),
      seed_(seed),
      layers_(std::move(layers)) {
  if (tag_.empty()) throw ConfigError("adapter tag must be nonempty");
  for (const auto& l : layers_) {
    if (l.down.shape() != Shape{d_model_, bottleneck_} || l.down_bias.shape() != Shape{bottleneck_} ||
        l.up.shape() != Shape{bottleneck_, d_model_} || l.up_bias.shape() != Shape{d_model_}) {
      throw ShapeError("adapter '" + tag_ + "': layer tensors do not match d_model " + std::to_string(d_model_) +
                       " and bottleneck " + std::to_string(bottleneck_));
    }
  }
}

Tensor AdapterModule::apply(std::size_t layer, const Tensor& hidden) const {
  const AdapterLayer& l = layers_.at(layer);
  Tensor z = relu(add(matmul(hidden, l.down), l.down_bias));
  return add(hidden, add(matmul(z, l.up), l.up_bias));
}

std::vector<NamedTensor> AdapterModule::named_tensors() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    out.push_back({p + "down", layers_[i].down});
    out.push_back({p + "down_bias", layers_[i].down_bias});
    out.push_back({p + "up", layers_[i].up});
    out.push_back({p + "up_bias", layers_[i].up_bias});
  }
  return out;
}

std::vector<NamedTensor> AdapterModule::qualified_tensors() const {
  auto out = named_tensors();
  const std::string prefix = "adapter." + std::string(role_name(role_)) + "." + tag_ + ".";
  for (auto& t : out) t.name = prefix + t.name;
  return out;
}

std::size_t AdapterModule::param_count() const {
  std::size_t n = 0;
  for (const auto& t : named_tensors()) n += t.tensor.numel();
  return n;
}

AdapterModule AdapterModule::clone() const {
  std::vector<AdapterLayer> layers;
  for (const auto& l : layers_) layers.push_back({l.down.clone(), l.down_bias.clone(), l.up.clone(), l.up_bias.clone()});
  return AdapterModule(role_, tag_, model_signature_, d_model_, bottleneck_, seed_, std::move(layers));
}

void AdapterModule::check_compatible(const ModelConfig& config) const {
  if (model_signature_ != config.signature()) {
    throw CheckpointError("adapter '" + tag_ + "' was built for model " + model_signature_ +
                          ", not " + config.signature());
  }
}

AdapterModule make_adapter(AdapterRole role, std::string tag, const ModelConfig& config,
                           const BottleneckSpec& bottleneck, std::uint64_t seed) {
  config.validate();
  const std::size_t d = config.d_model;
  const std::size_t b = bottleneck.resolve(d);
  Rng rng(seed);
  std::vector<AdapterLayer> layers;
  for (std::size_t i = 0; i < config.n_layers; ++i) {
    std::vector<double> down(d * b);
    for (double& v : down) v = rng.normal(0.0, 0.02);
    layers.push_back({Tensor::from_data({d, b}, std::move(down)), Tensor::zeros({b}), Tensor::zeros({b, d}),
                      Tensor::zeros({d})});
  }
  return AdapterModule(role, std::move(tag), config.signature(), d, b, seed, std::move(layers));
}

AdapterStack AdapterStack::language_pretraining(AdapterModule la) {
  AdapterStack s;
  s.set_language(std::move(la), false);
  return s;
}

AdapterStack AdapterStack::task_only(AdapterModule ta) {
  AdapterStack s;
  s.set_task(std::move(ta), false);
  return s;
}

AdapterStack AdapterStack::language_task(AdapterModule la, AdapterModule ta) {
  AdapterStack s;
  s.set_language(std::move(la), true);
  s.set_task(std::move(ta), false);
  return s;
}

void AdapterStack::set_language(AdapterModule la, bool frozen) {
  if (la.role() != AdapterRole::kLanguage) {
    throw ConfigError("adapter '" + la.tag() + "' has role task and cannot fill the language slot");
  }
  if (task_ && task_->adapter.model_signature() != la.model_signature()) {
    throw CheckpointError("language adapter '" + la.tag() + "' signature " + la.model_signature() +
                          " differs from task adapter signature " + task_->adapter.model_signature());
  }
  language_ = StackEntry{std::move(la), frozen};
}

void AdapterStack::set_task(AdapterModule ta, bool frozen) {
  if (ta.role() != AdapterRole::kTask) {
    throw ConfigError("adapter '" + ta.tag() + "' has role language and cannot fill the task slot");
  }
  if (language_ && language_->adapter.model_signature() != ta.model_signature()) {
    throw CheckpointError("task adapter '" + ta.tag() + "' signature " + ta.model_signature() +
                          " differs from language adapter signature " + language_->adapter.model_signature());
  }
  task_ = StackEntry{std::move(ta), frozen};
}

void AdapterStack::freeze_all() {
  if (language_) language_->frozen = true;
  if (task_) task_->frozen = true;
}

bool AdapterStack::fully_frozen() const {
  return base_frozen_ && (!language_ || language_->frozen) && (!task_ || task_->frozen);
}

std::size_t AdapterStack::adapter_params() const {
  std::size_t n = 0;
  if (language_) n += language_->adapter.param_count();
  if (task_) n += task_->adapter.param_count();
  return n;
}

Tensor AdapterStack::apply(std::size_t layer, const Tensor& hidden) const {
  Tensor h = hidden;
  if (language_) h = language_->adapter.apply(layer, h);
  if (task_) h = task_->adapter.apply(layer, h);
  return h;
}

AdapterStack swap_language_adapter(const AdapterStack& stack, AdapterModule new_la) {
  if (new_la.role() != AdapterRole::kLanguage) {
    throw ConfigError("swap_language_adapter: adapter '" + new_la.tag() + "' is not a language adapter");
  }
  const std::string* expected = nullptr;
  if (stack.language()) {
    expected = &stack.language()->adapter.model_signature();
  } else if (stack.task()) {
    expected = &stack.task()->adapter.model_signature();
  }
  if (expected && *expected != new_la.model_signature()) {
    throw CheckpointError("swap_language_adapter: adapter '" + new_la.tag() + "' was built for model " +
                          new_la.model_signature() + ", stack expects " + *expected);
  }
  AdapterStack out = stack;
  const bool frozen = stack.language() ? stack.language()->frozen : true;
  out.set_language(std::move(new_la), frozen);
  return out;
}

void save_adapter(const AdapterModule& adapter, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create " + dir.string() + ": " + ec.message());
  const auto tensors = adapter.named_tensors();
  detail::ordered_json meta;
  meta["role"] = role_name(adapter.role());
  meta["tag"] = adapter.tag();
  meta["bottleneck"] = adapter.bottleneck();
  meta["d_model"] = adapter.d_model();
  meta["n_layers"] = adapter.n_layers();
  meta["model_signature"] = adapter.model_signature();
  meta["seed"] = adapter.seed();
  meta["tensors"] = detail::write_blob(dir / "weights.bin", tensors);
  detail::write_json_file(dir / "adapter.json", meta);
}

AdapterModule load_adapter(const fs::path& dir) {
  const auto meta_path = dir / "adapter.json";
  const std::string where = meta_path.string();
  const auto meta = detail::read_json_file(meta_path);
  auto field = [&](const char* name) -> const detail::ordered_json& {
    if (!meta.is_object() || !meta.contains(name)) {
      throw CheckpointError(where + ": field '" + name + "': missing");
    }
    return meta[name];
  };
  auto uint_field = [&](const char* name) {
    const auto& v = field(name);
    if (!v.is_number_unsigned()) throw CheckpointError(where + ": field '" + std::string(name) + "': expected a non-negative integer");
    return v.get<std::uint64_t>();
  };
  auto str_field = [&](const char* name) {
    const auto& v = field(name);
    if (!v.is_string()) throw CheckpointError(where + ": field '" + std::string(name) + "': expected a string");
    return v.get<std::string>();
  };

  AdapterRole role;
  try {
    role = parse_role(str_field("role"));
  } catch (const ConfigError&) {
    throw CheckpointError(where + ": field 'role': must be \"language\" or \"task\"");
  }
  const std::string tag = str_field("tag");
  if (tag.empty()) throw CheckpointError(where + ": field 'tag': empty");
  const std::size_t b = uint_field("bottleneck");
  const std::size_t d = uint_field("d_model");
  const std::size_t n_layers = uint_field("n_layers");
  const std::uint64_t seed = uint_field("seed");
  const std::string signature = str_field("model_signature");

  auto tensors = detail::read_blob(dir / "weights.bin", field("tensors"), where);
  if (tensors.size() != 4 * n_layers) {
    throw CheckpointError(where + ": field 'tensors': expected " + std::to_string(4 * n_layers) + " tensors, found " +
                          std::to_string(tensors.size()));
  }
  std::vector<AdapterLayer> layers(n_layers);
  for (std::size_t i = 0; i < n_layers; ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    auto take = [&](std::size_t k, const std::string& name, const Shape& shape) {
      const NamedTensor& t = tensors[4 * i + k];
      if (t.name != p + name) throw CheckpointError(where + ": field 'tensors." + t.name + "': expected " + p + name);
      if (t.tensor.shape() != shape) {
        throw CheckpointError(where + ": field 'tensors." + t.name + ".shape': expected " + shape_str(shape) + ", found " +
                              shape_str(t.tensor.shape()));
      }
      return t.tensor;
    };
    layers[i] = {take(0, "down", {d, b}), take(1, "down_bias", {b}), take(2, "up", {b, d}), take(3, "up_bias", {d})};
  }
  return AdapterModule(role, tag, signature, d, b, seed, std::move(layers));
}

namespace {

void set_flags(const std::vector<NamedTensor>& tensors, bool trainable, FreezeMask& mask) {
  for (const auto& t : tensors) {
    Tensor handle = t.tensor;
    handle.set_requires_grad(trainable);
    if (!trainable) handle.zero_grad();
    if (trainable) {
      mask.trainable.push_back(t);
    } else {
      mask.frozen.insert(t.name);
    }
  }
}

}  // namespace

FreezeMask apply_freeze(const EncoderModel& model, const AdapterStack& stack, Objective objective) {
  if (!stack.base_frozen()) throw ConfigError("adapter training requires a frozen base model");
  const auto& la = stack.language();
  const auto& ta = stack.task();
  if (la) la->adapter.check_compatible(model.config());
  if (ta) ta->adapter.check_compatible(model.config());

  switch (objective) {
    case Objective::kMaskedLm:
      if (!la || la->frozen) throw ConfigError("masked-LM training needs a trainable language adapter");
      if (ta) throw ConfigError("masked-LM training does not take a task adapter");
      break;
    case Objective::kClassification:
      if (!ta || ta->frozen) throw ConfigError("classification training needs a trainable task adapter");
      if (la && !la->frozen) throw ConfigError("the language adapter must stay frozen while a task adapter trains");
      break;
    case Objective::kInference:
      if (!stack.fully_frozen()) throw ConfigError("inference needs every adapter frozen");
      break;
  }

  FreezeMask mask;
  set_flags(model.base_tensors(), false, mask);
  set_flags(model.mlm_head_tensors(), objective == Objective::kMaskedLm, mask);
  set_flags(model.classifier_tensors(), objective == Objective::kClassification, mask);
  if (la) set_flags(la->adapter.qualified_tensors(), !la->frozen, mask);
  if (ta) set_flags(ta->adapter.qualified_tensors(), !ta->frozen, mask);
  return mask;
}

}  // namespace adapterlab
