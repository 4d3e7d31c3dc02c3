#include "contextnav/nn/modules.hpp"

#include <cmath>
#include <stdexcept>

namespace contextnav::nn {

void init_uniform(Tensor& t, float bound, std::mt19937& rng) {
  std::uniform_real_distribution<float> u(-bound, bound);
  for (float& x : t.v) x = u(rng);
}

Linear Linear::create(ParamStore& ps, const std::string& name, int in, int out,
                      std::mt19937& rng) {
  Linear l;
  l.w = &ps.create(name + ".w", {out, in});
  l.b = &ps.create(name + ".b", {out, 1});
  const float bound = 1.0f / std::sqrt(static_cast<float>(in));
  init_uniform(*l.w, bound, rng);
  init_uniform(*l.b, bound, rng);
  return l;
}

Conv2d Conv2d::create(ParamStore& ps, const std::string& name, const Conv2dSpec& spec,
                      std::mt19937& rng) {
  Conv2d c;
  c.spec = spec;
  const int patch = spec.in_channels * spec.kernel_h * spec.kernel_w;
  c.w = &ps.create(name + ".w", {spec.out_channels, patch});
  c.b = &ps.create(name + ".b", {spec.out_channels, 1});
  const float bound = 1.0f / std::sqrt(static_cast<float>(patch));
  init_uniform(*c.w, bound, rng);
  init_uniform(*c.b, bound, rng);
  return c;
}

GroupNorm GroupNorm::create(ParamStore& ps, const std::string& name, int channels) {
  GroupNorm g;
  g.channels = channels;
  g.groups = channels % 4 == 0 ? 4 : 1;
  g.gamma = &ps.create(name + ".gamma", {channels, 1});
  g.beta = &ps.create(name + ".beta", {channels, 1});
  std::fill(g.gamma->v.begin(), g.gamma->v.end(), 1.0f);
  return g;
}

Gru Gru::create(ParamStore& ps, const std::string& name, int in, int hidden,
                std::mt19937& rng) {
  Gru g;
  g.in = in;
  g.hidden = hidden;
  g.w_ih = &ps.create(name + ".w_ih", {3 * hidden, in});
  g.w_hh = &ps.create(name + ".w_hh", {3 * hidden, hidden});
  g.b_ih = &ps.create(name + ".b_ih", {3 * hidden, 1});
  g.b_hh = &ps.create(name + ".b_hh", {3 * hidden, 1});
  const float bound = 1.0f / std::sqrt(static_cast<float>(hidden));
  init_uniform(*g.w_ih, bound, rng);
  init_uniform(*g.w_hh, bound, rng);
  init_uniform(*g.b_ih, bound, rng);
  init_uniform(*g.b_hh, bound, rng);
  return g;
}

DepthEncoder DepthEncoder::create(ParamStore& ps, const std::string& prefix,
                                  const DepthEncoderConfig& cfg, std::mt19937& rng) {
  DepthEncoder e;
  e.cfg = cfg;
  int length = cfg.rays;
  int in_ch = 1;
  for (size_t i = 0; i < cfg.channels.size(); ++i) {
    Conv2dSpec spec;
    spec.in_channels = in_ch;
    spec.in_h = 1;
    spec.in_w = length;
    spec.out_channels = cfg.channels[i];
    spec.kernel_h = 1;
    spec.kernel_w = 5;
    spec.stride_w = 2;
    if (spec.out_w() < 1)
      throw std::invalid_argument("depth encoder: scan too short for the conv stack");
    e.convs.push_back(Conv2d::create(ps, prefix + ".conv" + std::to_string(i), spec, rng));
    length = spec.out_w();
    in_ch = cfg.channels[i];
  }
  e.flat = length * in_ch;
  e.proj = Linear::create(ps, prefix + ".proj", e.flat, cfg.out, rng);
  return e;
}

Tape::Id DepthEncoder::fwd(Tape& t, Tape::Id scan) const {
  if (t.rows(scan) != cfg.rays) throw std::invalid_argument("depth encoder: ray count mismatch");
  Tape::Id x = scan;
  for (const auto& conv : convs) x = t.relu(conv.fwd(t, x));
  return proj.fwd(t, x);
}

Tape::Id ResidualBlock::fwd(Tape& t, Tape::Id x) const {
  const int hw1 = c1.spec.out_h() * c1.spec.out_w();
  Tape::Id y = t.relu(n1.fwd(t, c1.fwd(t, x), hw1));
  const int hw2 = c2.spec.out_h() * c2.spec.out_w();
  y = n2.fwd(t, c2.fwd(t, y), hw2);
  Tape::Id shortcut = skip ? skip->fwd(t, x) : x;
  return t.relu(t.add(y, shortcut));
}

MapEncoder MapEncoder::create(ParamStore& ps, const std::string& prefix,
                              const MapEncoderConfig& cfg, std::mt19937& rng) {
  if (cfg.widths.size() != cfg.strides.size())
    throw std::invalid_argument("map encoder: widths/strides mismatch");
  MapEncoder e;
  e.cfg = cfg;

  Conv2dSpec stem;
  stem.in_channels = cfg.in_channels;
  stem.in_h = cfg.n;
  stem.in_w = cfg.n;
  stem.out_channels = cfg.widths[0];
  stem.kernel_h = stem.kernel_w = 3;
  stem.stride_h = stem.stride_w = 2;
  stem.pad_h = stem.pad_w = 1;
  e.stem = Conv2d::create(ps, prefix + ".stem", stem, rng);
  e.stem_norm = GroupNorm::create(ps, prefix + ".stem_norm", cfg.widths[0]);

  int h = stem.out_h() / 2, w = stem.out_w() / 2;  // after the 2x2 maxpool
  int in_ch = cfg.widths[0];
  int block_idx = 0;
  for (size_t stage = 0; stage < cfg.widths.size(); ++stage) {
    for (int k = 0; k < cfg.blocks_per_stage; ++k) {
      const int out_ch = cfg.widths[stage];
      const int stride = k == 0 ? cfg.strides[stage] : 1;
      ResidualBlock b;
      b.in_h = h;
      b.in_w = w;
      Conv2dSpec s1;
      s1.in_channels = in_ch;
      s1.in_h = h;
      s1.in_w = w;
      s1.out_channels = out_ch;
      s1.kernel_h = s1.kernel_w = 3;
      s1.stride_h = s1.stride_w = stride;
      s1.pad_h = s1.pad_w = 1;
      if (s1.out_h() < 1) throw std::invalid_argument("map encoder: raster too small");
      const std::string bname = prefix + ".block" + std::to_string(block_idx++);
      b.c1 = Conv2d::create(ps, bname + ".c1", s1, rng);
      b.n1 = GroupNorm::create(ps, bname + ".n1", out_ch);
      Conv2dSpec s2 = s1;
      s2.in_channels = out_ch;
      s2.in_h = s1.out_h();
      s2.in_w = s1.out_w();
      s2.stride_h = s2.stride_w = 1;
      b.c2 = Conv2d::create(ps, bname + ".c2", s2, rng);
      b.n2 = GroupNorm::create(ps, bname + ".n2", out_ch);
      if (stride != 1 || in_ch != out_ch) {
        Conv2dSpec sk;
        sk.in_channels = in_ch;
        sk.in_h = h;
        sk.in_w = w;
        sk.out_channels = out_ch;
        sk.kernel_h = sk.kernel_w = 1;
        sk.stride_h = sk.stride_w = stride;
        b.skip = Conv2d::create(ps, bname + ".skip", sk, rng);
      }
      e.blocks.push_back(std::move(b));
      h = s1.out_h();
      w = s1.out_w();
      in_ch = out_ch;
    }
  }
  e.final_hw = h * w;
  e.fc = Linear::create(ps, prefix + ".fc", in_ch, cfg.out, rng);
  return e;
}

Tape::Id MapEncoder::fwd(Tape& t, Tape::Id obs) const {
  if (t.rows(obs) != cfg.in_channels * cfg.n * cfg.n)
    throw std::invalid_argument("map encoder: observation shape mismatch");
  Tape::Id x = stem.fwd(t, obs);
  const int sh = stem.spec.out_h(), sw = stem.spec.out_w();
  x = t.relu(stem_norm.fwd(t, x, sh * sw));
  x = t.maxpool2x2(x, cfg.widths[0], sh, sw);
  for (const auto& b : blocks) x = b.fwd(t, x);
  const int ch = cfg.widths.back();
  x = t.global_avg_pool(x, ch, final_hw);
  return fc.fwd(t, x);
}

WaypointEncoder WaypointEncoder::create(ParamStore& ps, const std::string& prefix, int hidden,
                                        int out, std::mt19937& rng) {
  WaypointEncoder e;
  e.l1 = Linear::create(ps, prefix + ".l1", 3, hidden, rng);
  e.l2 = Linear::create(ps, prefix + ".l2", hidden, out, rng);
  return e;
}

}  // namespace contextnav::nn
