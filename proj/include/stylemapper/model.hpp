#pragma once

#include <array>
#include <concepts>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylemapper/autodiff/checkpoint.hpp"
#include "stylemapper/autodiff/ops.hpp"
#include "stylemapper/autodiff/optim.hpp"
#include "stylemapper/image.hpp"

namespace stylemapper {

inline constexpr std::size_t kStyleDim = 8;

using StyleCode = std::array<double, kStyleDim>;

// Architecture hyperparameters. Kernel sizes follow the MUNIT lineage: 7x7 stems,
// 4x4 stride-2 downsampling, 3x3 residual convs.
struct ModelConfig {
  std::size_t width = 64;        // stem channels; content code has 4*width channels
  std::size_t n_res = 4;         // residual blocks in content encoder and decoder
  std::size_t n_style_down = 3;  // stride-2 convs in the style encoder
  std::size_t mlp_hidden = 256;  // hidden width of the style -> AdaIN parameter network
  std::size_t up_kernel = 5;     // conv after each x2 upsample
  float norm_eps = 1e-5F;

  std::size_t content_channels() const { return 4 * width; }

  std::string to_string() const {
    std::ostringstream os;
    os << "width=" << width << "\nn_res=" << n_res << "\nn_style_down=" << n_style_down << "\nmlp_hidden=" << mlp_hidden
       << "\nup_kernel=" << up_kernel << "\nstyle_dim=" << kStyleDim << "\n";
    return os.str();
  }

  static ModelConfig parse(const std::string& text) {
    ModelConfig c;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq);
      const auto val = static_cast<std::size_t>(std::stoul(line.substr(eq + 1)));
      if (key == "width") c.width = val;
      else if (key == "n_res") c.n_res = val;
      else if (key == "n_style_down") c.n_style_down = val;
      else if (key == "mlp_hidden") c.mlp_hidden = val;
      else if (key == "up_kernel") c.up_kernel = val;
      else if (key == "style_dim" && val != kStyleDim) throw std::runtime_error("checkpoint style_dim must be 8");
    }
    return c;
  }
};

// Images in [0,255] -> [N,1,H,W] tensor in [0,1].
template <typename T>
ad::Tensor<T> images_to_tensor(const std::vector<Image>& imgs) {
  if (imgs.empty()) throw std::invalid_argument("images_to_tensor: no images");
  const auto w = imgs[0].width(), h = imgs[0].height();
  std::vector<T> v;
  v.reserve(imgs.size() * w * h);
  for (const auto& img : imgs) {
    if (img.width() != w || img.height() != h) throw ad::ShapeError("images_to_tensor: images differ in size");
    for (double p : img.pixels()) v.push_back(static_cast<T>(p / kMaxIntensity));
  }
  return ad::Tensor<T>::from(std::move(v), {imgs.size(), 1, h, w});
}

template <typename T>
ad::Tensor<T> image_to_tensor(const Image& img) {
  return images_to_tensor<T>({img});
}

// Sample `n` of a [N,1,H,W] tensor in [0,1] back to an Image.
template <typename T>
Image tensor_to_image(const ad::Tensor<T>& t, std::size_t n = 0) {
  if (t.rank() != 4 || t.dim(1) != 1) throw ad::ShapeError("tensor_to_image: expected [N,1,H,W], got " + ad::shape_str(t.shape()));
  const auto h = t.dim(2), w = t.dim(3);
  std::vector<double> px(h * w);
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = std::clamp(static_cast<double>(t.values()[n * h * w + i]) * kMaxIntensity, 0.0, kMaxIntensity);
  }
  return Image(w, h, std::move(px));
}

template <typename T>
ad::Tensor<T> style_codes_to_tensor(const std::vector<StyleCode>& codes) {
  std::vector<T> v;
  for (const auto& c : codes) {
    for (double x : c) v.push_back(static_cast<T>(x));
  }
  return ad::Tensor<T>::from(std::move(v), {codes.size(), kStyleDim});
}

template <typename T>
std::vector<StyleCode> tensor_to_style_codes(const ad::Tensor<T>& t) {
  if (t.rank() != 2 || t.dim(1) != kStyleDim) throw ad::ShapeError("style code tensor must be [N,8], got " + ad::shape_str(t.shape()));
  std::vector<StyleCode> out(t.dim(0));
  for (std::size_t n = 0; n < out.size(); ++n) {
    for (std::size_t i = 0; i < kStyleDim; ++i) out[n][i] = static_cast<double>(t.values()[n * kStyleDim + i]);
  }
  return out;
}

// Tensor-level interface shared by the real network and the test doubles used for
// loss and evaluation checks. Inputs are [N,1,H,W] in [0,1]; style codes are [N,8].
template <class M>
concept StyleTransferModel = requires(const M& m, const ad::Tensor<typename M::scalar_type>& t) {
  { m.encode_content(t) } -> std::same_as<ad::Tensor<typename M::scalar_type>>;
  { m.encode_style(t) } -> std::same_as<ad::Tensor<typename M::scalar_type>>;
  { m.decode(t, t) } -> std::same_as<ad::Tensor<typename M::scalar_type>>;
};

// Content encoder E^c, style encoder E^s and decoder G.
template <typename T>
class StyleMapper {
 public:
  using scalar_type = T;
  using Tensor = ad::Tensor<T>;

  StyleMapper(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.width < 1 || cfg.mlp_hidden < 1 || cfg.n_style_down < 1) throw std::invalid_argument("invalid model config");
    std::mt19937_64 rng(seed);
    const std::size_t w = cfg.width;
    const std::size_t cc = cfg.content_channels();

    conv("content.stem", 1, w, 7, rng);
    conv("content.down0", w, 2 * w, 4, rng);
    conv("content.down1", 2 * w, cc, 4, rng);
    for (std::size_t r = 0; r < cfg.n_res; ++r) {
      conv("content.res" + std::to_string(r) + ".conv0", cc, cc, 3, rng);
      conv("content.res" + std::to_string(r) + ".conv1", cc, cc, 3, rng);
    }

    conv("style.stem", 1, w, 7, rng);
    std::size_t ch = w;
    for (std::size_t d = 0; d < cfg.n_style_down; ++d) {
      const std::size_t next = std::min(2 * ch, cc);
      conv("style.down" + std::to_string(d), ch, next, 4, rng);
      ch = next;
    }
    style_channels_ = ch;
    linear("style.fc", ch, kStyleDim, rng);

    linear("decoder.mlp0", kStyleDim, cfg.mlp_hidden, rng);
    linear("decoder.mlp1", cfg.mlp_hidden, adain_param_count(), rng);
    for (std::size_t r = 0; r < cfg.n_res; ++r) {
      conv("decoder.res" + std::to_string(r) + ".conv0", cc, cc, 3, rng);
      conv("decoder.res" + std::to_string(r) + ".conv1", cc, cc, 3, rng);
    }
    conv("decoder.up0", cc, 2 * w, cfg.up_kernel, rng);
    conv("decoder.up1", 2 * w, w, cfg.up_kernel, rng);
    conv("decoder.out", w, 1, 7, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  ad::ParameterSet<T>& params() { return params_; }
  const ad::ParameterSet<T>& params() const { return params_; }

  // [N,1,H,W] -> [N, 4*width, H/4, W/4]
  Tensor encode_content(const Tensor& x) const {
    check_input("encode_content", x, 4);
    Tensor h = ad::relu(ad::instance_norm(apply_conv("content.stem", x, 1, 3), eps()));
    h = ad::relu(ad::instance_norm(apply_conv("content.down0", h, 2, 1), eps()));
    h = ad::relu(ad::instance_norm(apply_conv("content.down1", h, 2, 1), eps()));
    for (std::size_t r = 0; r < cfg_.n_res; ++r) {
      const std::string p = "content.res" + std::to_string(r);
      Tensor y = ad::relu(ad::instance_norm(apply_conv(p + ".conv0", h, 1, 1), eps()));
      y = ad::instance_norm(apply_conv(p + ".conv1", y, 1, 1), eps());
      h = ad::add(h, y);
    }
    return h;
  }

  // [N,1,H,W] -> [N,8]. No normalization layers: feature statistics carry style.
  Tensor encode_style(const Tensor& x) const {
    check_input("encode_style", x, 1);
    Tensor h = ad::relu(apply_conv("style.stem", x, 1, 3));
    for (std::size_t d = 0; d < cfg_.n_style_down; ++d) h = ad::relu(apply_conv("style.down" + std::to_string(d), h, 2, 1));
    return ad::fully_connected(ad::global_avg_pool(h), p("style.fc.w"), p("style.fc.b"));
  }

  // content [N,C,h,w] + style [N,8] -> [N,1,4h,4w] in [0,1]
  Tensor decode(const Tensor& content, const Tensor& style) const {
    const std::size_t cc = cfg_.content_channels();
    if (content.rank() != 4 || content.dim(1) != cc) {
      throw ad::ShapeError("decode: content code must be [N," + std::to_string(cc) + ",h,w], got " +
                           ad::shape_str(content.shape()));
    }
    if (style.rank() != 2 || style.dim(1) != kStyleDim || style.dim(0) != content.dim(0)) {
      throw ad::ShapeError("decode: style code must be [" + std::to_string(content.dim(0)) + ",8], got " +
                           ad::shape_str(style.shape()));
    }
    const Tensor adain = ad::fully_connected(
        ad::relu(ad::fully_connected(style, p("decoder.mlp0.w"), p("decoder.mlp0.b"))), p("decoder.mlp1.w"),
        p("decoder.mlp1.b"));
    std::size_t offset = 0;
    auto next_affine = [&](const Tensor& h) {
      const Tensor gamma = ad::add_scalar(ad::slice_cols(adain, offset, cc), T(1));
      const Tensor beta = ad::slice_cols(adain, offset + cc, cc);
      offset += 2 * cc;
      return ad::channel_affine(ad::instance_norm(h, eps()), gamma, beta);
    };
    Tensor h = content;
    for (std::size_t r = 0; r < cfg_.n_res; ++r) {
      const std::string pre = "decoder.res" + std::to_string(r);
      Tensor y = ad::relu(next_affine(apply_conv(pre + ".conv0", h, 1, 1)));
      y = next_affine(apply_conv(pre + ".conv1", y, 1, 1));
      h = ad::add(h, y);
    }
    const std::size_t up_pad = cfg_.up_kernel / 2;
    h = ad::relu(apply_conv("decoder.up0", ad::upsample2x(h), 1, up_pad));
    h = ad::relu(apply_conv("decoder.up1", ad::upsample2x(h), 1, up_pad));
    return ad::sigmoid(apply_conv("decoder.out", h, 1, 3));
  }

  void save(const std::string& path) const { ad::save_checkpoint(path, params_, cfg_.to_string()); }

  static StyleMapper load(const std::string& path) {
    const auto data = ad::read_checkpoint(path);
    StyleMapper m(ModelConfig::parse(data.header), 0);
    ad::load_into(data, m.params_);
    return m;
  }

 private:
  std::size_t adain_param_count() const { return cfg_.n_res * 2 * 2 * cfg_.content_channels(); }
  T eps() const { return static_cast<T>(cfg_.norm_eps); }

  const Tensor& p(const std::string& name) const { return params_.get(name); }

  template <class Rng>
  void conv(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k, Rng& rng) {
    params_.add(name + ".w", ad::kaiming_init<T>({cout, cin, k, k}, cin * k * k, rng));
    params_.add(name + ".b", Tensor::zeros({cout}, true));
  }

  template <class Rng>
  void linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    params_.add(name + ".w", ad::kaiming_init<T>({out, in}, in, rng));
    params_.add(name + ".b", Tensor::zeros({out}, true));
  }

  Tensor apply_conv(const std::string& name, const Tensor& x, std::size_t stride, std::size_t pad) const {
    return ad::conv2d(x, p(name + ".w"), p(name + ".b"), stride, pad);
  }

  static void check_input(const char* op, const Tensor& x, std::size_t multiple) {
    if (x.rank() != 4 || x.dim(1) != 1) {
      throw ad::ShapeError(std::string(op) + ": expected [N,1,H,W] input, got " + ad::shape_str(x.shape()));
    }
    if (x.dim(2) < kMinImageSide || x.dim(3) < kMinImageSide || x.dim(2) % multiple || x.dim(3) % multiple) {
      throw ad::ShapeError(std::string(op) + ": image sides must be >= 8 and divisible by " + std::to_string(multiple) +
                           ", got " + ad::shape_str(x.shape()));
    }
  }

  ModelConfig cfg_;
  ad::ParameterSet<T> params_;
  std::size_t style_channels_ = 0;
};

// Image-level conveniences.
template <StyleTransferModel M>
ad::Tensor<typename M::scalar_type> encode_content(const M& model, const Image& img) {
  return model.encode_content(image_to_tensor<typename M::scalar_type>(img));
}

template <StyleTransferModel M>
StyleCode encode_style(const M& model, const Image& img) {
  return tensor_to_style_codes(model.encode_style(image_to_tensor<typename M::scalar_type>(img)))[0];
}

template <StyleTransferModel M>
std::vector<StyleCode> encode_styles(const M& model, const std::vector<Image>& imgs) {
  std::vector<StyleCode> out;
  out.reserve(imgs.size());
  for (const auto& img : imgs) out.push_back(encode_style(model, img));
  return out;
}

template <StyleTransferModel M>
Image decode(const M& model, const ad::Tensor<typename M::scalar_type>& content, const StyleCode& style) {
  return tensor_to_image(model.decode(content, style_codes_to_tensor<typename M::scalar_type>({style})));
}

}  // namespace stylemapper
