// Copyright 2026 The xptrav Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "xptrav/binary_io.hpp"
#include "xptrav/encoder.hpp"
#include "xptrav/simd/kernels.hpp"

namespace xptrav {

namespace {

constexpr char kWeightsMagic[5] = "TCW1";

struct TensorSpec {
  std::string name;
  std::vector<std::uint32_t> dims;
};

std::vector<TensorSpec> expected_tensors() {
  const auto& ch = ConvWeights::kChannels;
  std::vector<TensorSpec> specs;
  for (int s = 0; s < 3; ++s) {
    const auto out = static_cast<std::uint32_t>(ch[s + 1]);
    const auto in = static_cast<std::uint32_t>(ch[s]);
    const std::string prefix = "conv" + std::to_string(s + 1);
    specs.push_back({prefix + ".w", {out, in, 3, 3}});
    specs.push_back({prefix + ".b", {out}});
  }
  specs.push_back({"proj.w", {kFeatureDim, kFeatureDim}});
  specs.push_back({"proj.b", {kFeatureDim}});
  return specs;
}

std::string dims_str(const std::vector<std::uint32_t>& dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

void check_tensor(const std::string& name, const std::vector<float>& values, std::size_t expected) {
  if (values.size() != expected) {
    throw FormatError("tensor " + name + ": expected " + std::to_string(expected) +
                      " values, got " + std::to_string(values.size()));
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw FormatError("tensor " + name + ": non-finite parameter");
  }
}

}  // namespace

ConvWeights ConvWeights::zeros() {
  ConvWeights w;
  for (int s = 0; s < 3; ++s) {
    ConvStage& st = w.stages[static_cast<std::size_t>(s)];
    st.in_channels = kChannels[static_cast<std::size_t>(s)];
    st.out_channels = kChannels[static_cast<std::size_t>(s) + 1];
    st.kernel.assign(static_cast<std::size_t>(st.out_channels) * st.in_channels * 9, 0.0f);
    st.bias.assign(static_cast<std::size_t>(st.out_channels), 0.0f);
  }
  w.proj_weight.assign(kFeatureDim * kFeatureDim, 0.0f);
  w.proj_bias.assign(kFeatureDim, 0.0f);
  return w;
}

void ConvWeights::validate() const {
  for (std::size_t s = 0; s < 3; ++s) {
    const ConvStage& st = stages[s];
    const std::string prefix = "conv" + std::to_string(s + 1);
    if (st.in_channels != kChannels[s] || st.out_channels != kChannels[s + 1]) {
      throw FormatError("tensor " + prefix + ".w: stage " + std::to_string(s + 1) +
                        " expects " + std::to_string(kChannels[s + 1]) + " out x " +
                        std::to_string(kChannels[s]) + " in channels, got " +
                        std::to_string(st.out_channels) + " x " + std::to_string(st.in_channels));
    }
    check_tensor(prefix + ".w", st.kernel, static_cast<std::size_t>(st.out_channels) * st.in_channels * 9);
    check_tensor(prefix + ".b", st.bias, static_cast<std::size_t>(st.out_channels));
  }
  check_tensor("proj.w", proj_weight, kFeatureDim * kFeatureDim);
  check_tensor("proj.b", proj_bias, kFeatureDim);
}

FeatureMap conv_stage(const FeatureMap& input, const ConvStage& stage) {
  if (input.channels != stage.in_channels) {
    throw std::invalid_argument("conv stage: input has " + std::to_string(input.channels) +
                                " channels, stage expects " + std::to_string(stage.in_channels));
  }
  const int out_h = (input.height + 1) / 2;
  const int out_w = (input.width + 1) / 2;
  FeatureMap out(stage.out_channels, out_h, out_w);
  const std::size_t taps = static_cast<std::size_t>(stage.in_channels) * 9;
  std::vector<float> column(taps);
  const simd::Kernels& k = simd::active();

  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      // Gather the zero-padded receptive field in (in, ky, kx) order.
      std::size_t t = 0;
      for (int c = 0; c < stage.in_channels; ++c) {
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = 2 * oy + ky - 1;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = 2 * ox + kx - 1;
            const bool inside = iy >= 0 && iy < input.height && ix >= 0 && ix < input.width;
            column[t++] = inside ? input.at(c, iy, ix) : 0.0f;
          }
        }
      }
      for (int o = 0; o < stage.out_channels; ++o) {
        const float acc = stage.bias[static_cast<std::size_t>(o)] +
                          k.dot(stage.kernel.data() + static_cast<std::size_t>(o) * taps, column.data(), taps);
        out.at(o, oy, ox) = acc > 0.0f ? acc : 0.0f;
      }
    }
  }
  return out;
}

FeatureVector encode_conv(const Patch& patch, const ConvWeights& weights, const EncoderConfig& cfg) {
  if (patch.size() != ConvWeights::kInputSize) {
    throw std::invalid_argument("conv encoder needs a 16 x 16 patch, got " +
                                std::to_string(patch.size()));
  }
  const Patch norm = normalize_patch(patch, cfg);
  FeatureMap x(kPatchChannels, patch.size(), patch.size());
  const auto src = norm.data();
  std::copy(src.begin(), src.end(), x.data.begin());

  for (const ConvStage& stage : weights.stages) x = conv_stage(x, stage);

  std::vector<float> pooled(static_cast<std::size_t>(x.channels), 0.0f);
  const double area = static_cast<double>(x.height) * x.width;
  for (int c = 0; c < x.channels; ++c) {
    double acc = 0.0;
    for (int y = 0; y < x.height; ++y) {
      for (int xx = 0; xx < x.width; ++xx) acc += x.at(c, y, xx);
    }
    pooled[static_cast<std::size_t>(c)] = static_cast<float>(acc / area);
  }
  if (pooled.size() != kFeatureDim) throw FormatError("conv stack does not end in 32 channels");

  const simd::Kernels& k = simd::active();
  FeatureVector out;
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    out[i] = static_cast<double>(weights.proj_bias[i] +
                                 k.dot(weights.proj_weight.data() + i * kFeatureDim, pooled.data(), kFeatureDim));
  }
  return out;
}

// ─── Weights file ───────────────────────────────────────────────────────────

void write_weights(std::ostream& out, const ConvWeights& weights) {
  weights.validate();
  const auto specs = expected_tensors();
  const auto values_of = [&](std::size_t i) -> const std::vector<float>& {
    if (i < 6) {
      const ConvStage& st = weights.stages[i / 2];
      return i % 2 == 0 ? st.kernel : st.bias;
    }
    return i == 6 ? weights.proj_weight : weights.proj_bias;
  };
  binio::write_bytes(out, kWeightsMagic, 4);
  binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(specs.size()));
  for (std::size_t i = 0; i < specs.size(); ++i) {
    binio::write_name(out, specs[i].name);
    binio::write<std::uint8_t>(out, static_cast<std::uint8_t>(specs[i].dims.size()));
    for (auto d : specs[i].dims) binio::write<std::uint32_t>(out, d);
    const auto& v = values_of(i);
    binio::write_array(out, v.data(), v.size());
  }
  if (!out) throw IoError("failed writing weights");
}

ConvWeights read_weights(std::istream& in) {
  binio::expect_magic(in, kWeightsMagic, "weights");
  const auto count = binio::read<std::uint32_t>(in, "tensor count");
  if (count > 1024) throw FormatError("implausible tensor count");

  std::map<std::string, std::pair<std::vector<std::uint32_t>, std::vector<float>>> tensors;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = binio::read_name(in, "tensor " + std::to_string(t));
    const auto rank = binio::read<std::uint8_t>(in, "tensor " + name + " rank");
    std::vector<std::uint32_t> dims(rank);
    std::size_t total = 1;
    for (auto& d : dims) {
      d = binio::read<std::uint32_t>(in, "tensor " + name + " dims");
      total *= d;
      if (total > (1u << 24)) throw FormatError("tensor " + name + ": implausible size");
    }
    std::vector<float> values(total);
    binio::read_array(in, values.data(), values.size(), "tensor " + name + " data");
    tensors[name] = {std::move(dims), std::move(values)};
  }

  ConvWeights w = ConvWeights::zeros();
  for (const TensorSpec& spec : expected_tensors()) {
    const auto it = tensors.find(spec.name);
    if (it == tensors.end()) throw FormatError("missing tensor " + spec.name);
    const auto& [dims, values] = it->second;
    if (dims != spec.dims) {
      std::string where = spec.name;
      if (spec.name.rfind("conv", 0) == 0) where += " (stage " + spec.name.substr(4, 1) + ")";
      throw FormatError("tensor " + where + ": shape " + dims_str(dims) + ", expected " +
                        dims_str(spec.dims));
    }
    std::vector<float>* dst = nullptr;
    if (spec.name == "proj.w") {
      dst = &w.proj_weight;
    } else if (spec.name == "proj.b") {
      dst = &w.proj_bias;
    } else {
      ConvStage& st = w.stages[static_cast<std::size_t>(spec.name[4] - '1')];
      dst = spec.name.back() == 'w' ? &st.kernel : &st.bias;
    }
    *dst = values;
  }
  w.validate();
  return w;
}

void save_weights(const ConvWeights& weights, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_weights(out, weights);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

ConvWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  return read_weights(in);
}

// ─── Encoder ────────────────────────────────────────────────────────────────

Encoder::Encoder(EncoderConfig cfg) : cfg_(std::move(cfg)) {
  if (!(cfg_.elevation_scale > 0.0)) throw std::invalid_argument("elevation scale must be positive");
  if (cfg_.kind == EncoderKind::conv) {
    if (!cfg_.weights_path) throw std::invalid_argument("conv encoder requires a weights file");
    weights_ = load_weights(*cfg_.weights_path);
  }
}

Encoder::Encoder(EncoderConfig cfg, ConvWeights weights) : cfg_(std::move(cfg)) {
  if (!(cfg_.elevation_scale > 0.0)) throw std::invalid_argument("elevation scale must be positive");
  weights.validate();
  weights_ = std::move(weights);
}

FeatureVector Encoder::encode(const Patch& patch) const {
  if (cfg_.kind == EncoderKind::conv) return encode_conv(patch, *weights_, cfg_);
  return encode_analytic(patch, cfg_);
}

}  // namespace xptrav
