#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "contextnav/nn/tape.hpp"

namespace contextnav::nn {

void init_uniform(Tensor& t, float bound, std::mt19937& rng);

struct Linear {
  Tensor* w = nullptr;
  Tensor* b = nullptr;
  static Linear create(ParamStore& ps, const std::string& name, int in, int out,
                       std::mt19937& rng);
  Tape::Id fwd(Tape& t, Tape::Id x) const { return t.linear(t.param(*w), x, t.param(*b)); }
};

struct Conv2d {
  Tensor* w = nullptr;
  Tensor* b = nullptr;
  Conv2dSpec spec;
  static Conv2d create(ParamStore& ps, const std::string& name, const Conv2dSpec& spec,
                       std::mt19937& rng);
  Tape::Id fwd(Tape& t, Tape::Id x) const {
    return t.conv2d(x, t.param(*w), t.param(*b), spec);
  }
};

struct GroupNorm {
  Tensor* gamma = nullptr;
  Tensor* beta = nullptr;
  int groups = 1;
  int channels = 1;
  static GroupNorm create(ParamStore& ps, const std::string& name, int channels);
  Tape::Id fwd(Tape& t, Tape::Id x, int hw) const {
    return t.group_norm(x, t.param(*gamma), t.param(*beta), groups, channels, hw);
  }
};

struct Gru {
  Tensor* w_ih = nullptr;
  Tensor* w_hh = nullptr;
  Tensor* b_ih = nullptr;
  Tensor* b_hh = nullptr;
  int in = 0;
  int hidden = 0;
  static Gru create(ParamStore& ps, const std::string& name, int in, int hidden,
                    std::mt19937& rng);
  Tape::GruParams bind(Tape& t) const {
    return {t.param(*w_ih), t.param(*w_hh), t.param(*b_ih), t.param(*b_hh)};
  }
  Tape::Id step(Tape& t, Tape::Id x, Tape::Id h) const { return t.gru_step(x, h, bind(t)); }
  Tape::Id sequence(Tape& t, Tape::Id x, Tape::Id h0, std::span<const uint8_t> reset, int T,
                    int B) const {
    return t.gru_sequence(x, h0, bind(t), reset, T, B);
  }
};

// 3 stacked 1-D convolutions (kernel 5, stride 2) + linear projection.
struct DepthEncoderConfig {
  int rays = 128;
  std::vector<int> channels{32, 64, 64};
  int out = 512;
};

struct DepthEncoder {
  DepthEncoderConfig cfg;
  std::vector<Conv2d> convs;
  Linear proj;
  int flat = 0;
  static DepthEncoder create(ParamStore& ps, const std::string& prefix,
                             const DepthEncoderConfig& cfg, std::mt19937& rng);
  Tape::Id fwd(Tape& t, Tape::Id scan) const;  // scan [rays x B] -> [out x B]
};

// Residual conv net: stem (3x3 stride 2 + 2x2 maxpool), then one stage per
// width — the first block of a stage applies its stride/width change — global
// average pool and a linear head.
struct MapEncoderConfig {
  int n = 100;
  int in_channels = 2;
  std::vector<int> widths{8, 16, 32, 32};
  std::vector<int> strides{1, 2, 2, 1};
  int blocks_per_stage = 1;  // 2 gives the full 18-layer variant
  int out = 512;
};

struct ResidualBlock {
  Conv2d c1, c2;
  GroupNorm n1, n2;
  std::optional<Conv2d> skip;
  int in_h = 0, in_w = 0;
  Tape::Id fwd(Tape& t, Tape::Id x) const;
};

struct MapEncoder {
  MapEncoderConfig cfg;
  Conv2d stem;
  GroupNorm stem_norm;
  std::vector<ResidualBlock> blocks;
  Linear fc;
  int final_hw = 0;
  static MapEncoder create(ParamStore& ps, const std::string& prefix,
                           const MapEncoderConfig& cfg, std::mt19937& rng);
  Tape::Id fwd(Tape& t, Tape::Id obs) const;  // obs [2*n*n x B] -> [out x B]
};

// Two-layer MLP for polar waypoints: 3 -> hidden -> out.
struct WaypointEncoder {
  Linear l1, l2;
  static WaypointEncoder create(ParamStore& ps, const std::string& prefix, int hidden, int out,
                                std::mt19937& rng);
  Tape::Id fwd(Tape& t, Tape::Id wp) const { return l2.fwd(t, t.relu(l1.fwd(t, wp))); }
};

}  // namespace contextnav::nn
