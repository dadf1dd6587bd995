#include <cmath>

#include "adfilt/rng.hpp"
#include "adfilt/victims.hpp"

namespace adfilt::models {

namespace {
void require_odd(int k, const char* what) {
  if (k < 1 || k % 2 == 0) {
    throw ContractError(std::string(what) + " must be odd and positive, got " +
                        std::to_string(k));
  }
}
}  // namespace

CompactCnnModel::CompactCnnModel(const ModelSpec& spec, std::size_t C, std::size_t T, int K)
    : VictimModel(C, T, K), spec_(spec) {
  const CnnSpec& c = spec_.cnn;
  require_odd(c.temporal_kernel, "temporal kernel");
  require_odd(c.separable_kernel, "separable kernel");
  if (c.temporal_filters < 1 || c.depth_multiplier < 1 || c.separable_filters < 1 ||
      c.pool1 < 1 || c.pool2 < 1) {
    throw ContractError("CNN spec fields must be positive");
  }
  const std::size_t f1 = static_cast<std::size_t>(c.temporal_filters);
  const std::size_t fd = f1 * static_cast<std::size_t>(c.depth_multiplier);
  const std::size_t f2 = static_cast<std::size_t>(c.separable_filters);
  const std::size_t kt = static_cast<std::size_t>(c.temporal_kernel);
  const std::size_t ks = static_cast<std::size_t>(c.separable_kernel);

  names_.push_back("conv_temporal");
  params_.emplace_back(Tensor::Shape{f1, 1, 1, kt});
  names_.push_back("conv_depthwise");
  params_.emplace_back(Tensor::Shape{fd, 1, C_, 1});

  std::size_t t_out;
  switch (c.depth) {
    case CnnSpec::Depth::Shallow:
      t_out = T_ / (static_cast<std::size_t>(c.pool1) * static_cast<std::size_t>(c.pool2));
      feature_len_ = fd * t_out;
      break;
    case CnnSpec::Depth::Standard:
    case CnnSpec::Depth::Deep: {
      const std::size_t t1 = T_ / static_cast<std::size_t>(c.pool1);
      std::size_t t2 = t1 / static_cast<std::size_t>(c.pool2);
      names_.push_back("conv_sep_depth");
      params_.emplace_back(Tensor::Shape{fd, 1, 1, ks});
      names_.push_back("conv_sep_point");
      params_.emplace_back(Tensor::Shape{f2, fd, 1, 1});
      if (c.depth == CnnSpec::Depth::Deep) {
        names_.push_back("conv_extra");
        params_.emplace_back(Tensor::Shape{f2, f2, 1, ks});
        t2 /= 2;
      }
      t_out = t2;
      feature_len_ = f2 * t_out;
      break;
    }
    default:
      throw ContractError("unknown CNN depth variant");
  }
  if (t_out == 0) {
    throw ShapeError("CNN pooling consumes the whole time axis (T=" + std::to_string(T_) + ")");
  }
  names_.push_back("dense_w");
  params_.emplace_back(Tensor::Shape{feature_len_, static_cast<std::size_t>(K_)});
  names_.push_back("dense_b");
  params_.emplace_back(Tensor::Shape{static_cast<std::size_t>(K_)});
}

void CompactCnnModel::init_params(std::uint64_t seed) {
  Rng rng = make_rng(derive_seed(seed, 0xC0DE));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (names_[i] == "dense_b") {
      p.fill(0.0);
      continue;
    }
    double fan_in, fan_out;
    if (p.rank() == 4) {
      fan_in = static_cast<double>(p.dim(1) * p.dim(2) * p.dim(3));
      fan_out = static_cast<double>(p.dim(0) * p.dim(2) * p.dim(3));
    } else {
      fan_in = static_cast<double>(p.dim(0));
      fan_out = static_cast<double>(p.dim(1));
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = uniform(rng, -limit, limit);
  }
}

std::size_t CompactCnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& p : params_) n += p.size();
  return n;
}

ad::Var CompactCnnModel::logits(ad::Graph& g, ad::Var input,
                                std::vector<ad::Var>* bound) const {
  const auto& shape = input.shape();
  if (shape.size() != 3 || shape[1] != C_ || shape[2] != T_) {
    throw ShapeError("model expects input (B," + std::to_string(C_) + "," + std::to_string(T_) +
                     "), got " + input.value().shape_str());
  }
  const CnnSpec& c = spec_.cnn;
  std::vector<ad::Var> p;
  p.reserve(params_.size());
  for (const Tensor& t : params_) {
    p.push_back(bound ? g.param(t) : g.constant(t));
  }
  if (bound) bound->insert(bound->end(), p.begin(), p.end());

  auto act = [&](ad::Var v) {
    return c.activation == CnnSpec::Activation::Relu ? ad::relu(v) : ad::elu(v);
  };

  const std::size_t batch = shape[0];
  ad::Var x = ad::reshape(input, {batch, 1, C_, T_});
  std::size_t pi = 0;
  // temporal convolution, length-preserving
  x = ad::conv2d(x, p[pi++], 1, 1, 0, (c.temporal_kernel - 1) / 2);
  // depthwise spatial convolution collapses the channel axis
  x = ad::conv2d(x, p[pi++], 1, c.temporal_filters, 0, 0);
  x = act(x);
  if (c.depth == CnnSpec::Depth::Shallow) {
    x = ad::avg_pool(x, 1, static_cast<std::size_t>(c.pool1) * c.pool2);
  } else {
    x = ad::avg_pool(x, 1, c.pool1);
    const int fd = c.temporal_filters * c.depth_multiplier;
    x = ad::conv2d(x, p[pi++], 1, fd, 0, (c.separable_kernel - 1) / 2);
    x = ad::conv2d(x, p[pi++], 1, 1, 0, 0);  // pointwise
    x = act(x);
    x = ad::avg_pool(x, 1, c.pool2);
    if (c.depth == CnnSpec::Depth::Deep) {
      x = ad::conv2d(x, p[pi++], 1, 1, 0, (c.separable_kernel - 1) / 2);
      x = act(x);
      x = ad::avg_pool(x, 1, 2);
    }
  }
  ad::Var flat = ad::flatten_batch(x);
  return ad::add(ad::matmul(flat, p[pi]), p[pi + 1]);
}

void CompactCnnModel::fit(const eeg::EegDataset& train, const TrainConfig& cfg,
                          const eeg::EegDataset* validation) {
  init_params(cfg.seed);
  train_seed_ = cfg.seed;
  train_params(*this, train, cfg, validation);
}

std::vector<Tensor*> CompactCnnModel::trainable() {
  std::vector<Tensor*> out;
  out.reserve(params_.size());
  for (Tensor& p : params_) out.push_back(&p);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> CompactCnnModel::state() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (std::size_t i = 0; i < params_.size(); ++i) out.emplace_back(names_[i], &params_[i]);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> CompactCnnModel::state() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < params_.size(); ++i) out.emplace_back(names_[i], &params_[i]);
  return out;
}

}  // namespace adfilt::models
