#include <cstring>
#include <fstream>

#include <json.hpp>

#include "adfilt/victims.hpp"

namespace adfilt::models {

using nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;

json spec_to_json(const ModelSpec& spec) {
  json j;
  j["kind"] = to_string(spec.kind);
  if (spec.kind == ModelKind::CompactCnn) {
    const CnnSpec& c = spec.cnn;
    j["temporal_filters"] = c.temporal_filters;
    j["temporal_kernel"] = c.temporal_kernel;
    j["depth_multiplier"] = c.depth_multiplier;
    j["separable_filters"] = c.separable_filters;
    j["separable_kernel"] = c.separable_kernel;
    j["pool1"] = c.pool1;
    j["pool2"] = c.pool2;
    j["depth"] = c.depth == CnnSpec::Depth::Shallow
                     ? "shallow"
                     : (c.depth == CnnSpec::Depth::Deep ? "deep" : "standard");
    j["activation"] = c.activation == CnnSpec::Activation::Relu ? "relu" : "elu";
  } else {
    j["spatial_filters"] = spec.spatial_filters;
    j["xdawn_target"] = spec.xdawn_target;
  }
  return j;
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec spec;
  spec.kind = model_kind_from_string(j.at("kind").get<std::string>());
  if (spec.kind == ModelKind::CompactCnn) {
    CnnSpec& c = spec.cnn;
    c.temporal_filters = j.at("temporal_filters").get<int>();
    c.temporal_kernel = j.at("temporal_kernel").get<int>();
    c.depth_multiplier = j.at("depth_multiplier").get<int>();
    c.separable_filters = j.at("separable_filters").get<int>();
    c.separable_kernel = j.at("separable_kernel").get<int>();
    c.pool1 = j.at("pool1").get<int>();
    c.pool2 = j.at("pool2").get<int>();
    const std::string depth = j.at("depth").get<std::string>();
    c.depth = depth == "shallow" ? CnnSpec::Depth::Shallow
                                 : (depth == "deep" ? CnnSpec::Depth::Deep
                                                    : CnnSpec::Depth::Standard);
    c.activation = j.at("activation").get<std::string>() == "relu"
                       ? CnnSpec::Activation::Relu
                       : CnnSpec::Activation::Elu;
  } else {
    spec.spatial_filters = j.at("spatial_filters").get<int>();
    spec.xdawn_target = j.at("xdawn_target").get<int>();
  }
  return spec;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + tmp.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw FormatError("write failed for '" + tmp.string() + "'");
  std::filesystem::rename(tmp, path);
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void save_model(const std::filesystem::path& stem, const VictimModel& model) {
  const auto state = model.state();
  std::string blob;
  json params = json::array();
  for (const auto& [name, tensor] : state) {
    json p;
    p["name"] = name;
    p["shape"] = tensor->shape();
    params.push_back(p);
    for (std::size_t i = 0; i < tensor->size(); ++i) {
      const float v = static_cast<float>((*tensor)[i]);
      const char* bytes = reinterpret_cast<const char*>(&v);
      blob.append(bytes, sizeof(float));
    }
  }

  json manifest;
  manifest["format"] = "adfilt-model";
  manifest["version"] = kManifestVersion;
  manifest["spec"] = spec_to_json(model.spec());
  manifest["C"] = model.channels();
  manifest["T"] = model.samples();
  manifest["K"] = model.classes();
  manifest["seed"] = model.train_seed();
  manifest["params"] = params;
  manifest["blob_bytes"] = blob.size();
  manifest["blob"] = stem.filename().string() + ".bin";

  write_file(stem.string() + ".json", manifest.dump(2) + "\n");
  write_file(stem.string() + ".bin", blob);
}

std::unique_ptr<VictimModel> load_model(const std::filesystem::path& stem) {
  const auto manifest_path = std::filesystem::path(stem.string() + ".json");
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw FormatError(manifest_path.string() + ": " + e.what(), e.byte);
  }
  try {
    if (manifest.at("format").get<std::string>() != "adfilt-model") {
      throw FormatError(manifest_path.string() + ": not a model manifest");
    }
    if (manifest.at("version").get<int>() != kManifestVersion) {
      throw FormatError(manifest_path.string() + ": unsupported manifest version");
    }
    const ModelSpec spec = spec_from_json(manifest.at("spec"));
    auto model = make_model(spec, manifest.at("C").get<std::size_t>(),
                            manifest.at("T").get<std::size_t>(), manifest.at("K").get<int>());
    model->set_train_seed(manifest.at("seed").get<std::uint64_t>());

    const auto blob_path = stem.parent_path() / manifest.at("blob").get<std::string>();
    const auto blob = read_file(blob_path);
    if (blob.size() != manifest.at("blob_bytes").get<std::size_t>()) {
      throw FormatError(blob_path.string() + ": blob is " + std::to_string(blob.size()) +
                        " bytes but the manifest declares " +
                        std::to_string(manifest.at("blob_bytes").get<std::size_t>()));
    }

    auto state = model->state();
    const json& params = manifest.at("params");
    if (params.size() != state.size()) {
      throw FormatError(manifest_path.string() + ": manifest declares " +
                        std::to_string(params.size()) + " parameters, model has " +
                        std::to_string(state.size()));
    }
    std::size_t offset = 0;
    for (std::size_t i = 0; i < state.size(); ++i) {
      auto& [name, tensor] = state[i];
      if (params[i].at("name").get<std::string>() != name) {
        throw FormatError(manifest_path.string() + ": parameter " + std::to_string(i) +
                          " is named '" + params[i].at("name").get<std::string>() +
                          "', expected '" + name + "'");
      }
      const auto shape = params[i].at("shape").get<Tensor::Shape>();
      if (shape != tensor->shape()) {
        throw FormatError(manifest_path.string() + ": parameter '" + name +
                          "' has shape " + Tensor::shape_str(shape) + ", expected " +
                          tensor->shape_str());
      }
      if (offset + tensor->size() * sizeof(float) > blob.size()) {
        throw FormatError(blob_path.string() + ": blob truncated in parameter '" + name + "'",
                          offset);
      }
      for (std::size_t j = 0; j < tensor->size(); ++j) {
        float v;
        std::memcpy(&v, blob.data() + offset, sizeof(float));
        (*tensor)[j] = static_cast<double>(v);
        offset += sizeof(float);
      }
    }
    if (offset != blob.size()) {
      throw FormatError(blob_path.string() + ": " + std::to_string(blob.size() - offset) +
                            " trailing bytes after the last parameter",
                        offset);
    }
    return model;
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
}

}  // namespace adfilt::models
