#include "contextnav/nn/tape.hpp"

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <stdexcept>

namespace contextnav::nn {

namespace {

using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<Mat>;
using CMap = Eigen::Map<const Mat>;

inline float stable_sigmoid(float x) {
  if (x >= 0.0f) {
    const float e = std::exp(-x);
    return 1.0f / (1.0f + e);
  }
  const float e = std::exp(x);
  return e / (1.0f + e);
}

}  // namespace

namespace {
inline Map vm(Tape& t, Tape::Id id) { return Map(t.data(id), t.rows(id), t.cols(id)); }
inline CMap cvm(const Tape& t, Tape::Id id) { return CMap(t.cdata(id), t.rows(id), t.cols(id)); }
inline Map gvm(Tape& t, Tape::Id id) { return Map(t.gdata(id), t.rows(id), t.cols(id)); }
}  // namespace

Tape::Id Tape::make(int rows, int cols, bool needs_grad) {
  Node n;
  n.t = Tensor({rows, cols});
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::param(Tensor& p) {
  const Id id = make(p.rows(), p.cols(), true);
  nodes_[id].t.v = p.v;
  nodes_[id].bound = &p;
  return id;
}

Tape::Id Tape::input(std::span<const float> d, int rows, int cols) {
  if (static_cast<int64_t>(d.size()) != int64_t(rows) * cols)
    throw std::invalid_argument("tape input: size does not match shape");
  const Id id = make(rows, cols, false);
  std::copy(d.begin(), d.end(), nodes_[id].t.v.begin());
  return id;
}

// ---- elementwise -----------------------------------------------------------

namespace {
void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}
}  // namespace

Tape::Id Tape::add(Id a, Id b) {
  check_same_shape(nodes_[a].t, nodes_[b].t, "add");
  const Id y = make(rows(a), cols(a), wants(a) || wants(b));
  vm(*this, y) = cvm(*this, a) + cvm(*this, b);
  steps_.push_back({y, [a, b, y](Tape& t) {
    if (t.wants(a)) gvm(t, a) += gvm(t, y);
    if (t.wants(b)) gvm(t, b) += gvm(t, y);
  }});
  return y;
}

Tape::Id Tape::sub(Id a, Id b) {
  check_same_shape(nodes_[a].t, nodes_[b].t, "sub");
  const Id y = make(rows(a), cols(a), wants(a) || wants(b));
  vm(*this, y) = cvm(*this, a) - cvm(*this, b);
  steps_.push_back({y, [a, b, y](Tape& t) {
    if (t.wants(a)) gvm(t, a) += gvm(t, y);
    if (t.wants(b)) gvm(t, b) -= gvm(t, y);
  }});
  return y;
}

Tape::Id Tape::mul(Id a, Id b) {
  check_same_shape(nodes_[a].t, nodes_[b].t, "mul");
  const Id y = make(rows(a), cols(a), wants(a) || wants(b));
  vm(*this, y) = cvm(*this, a).cwiseProduct(cvm(*this, b));
  steps_.push_back({y, [a, b, y](Tape& t) {
    if (t.wants(a)) gvm(t, a) += gvm(t, y).cwiseProduct(cvm(t, b));
    if (t.wants(b)) gvm(t, b) += gvm(t, y).cwiseProduct(cvm(t, a));
  }});
  return y;
}

Tape::Id Tape::div(Id a, Id b) {
  check_same_shape(nodes_[a].t, nodes_[b].t, "div");
  const Id y = make(rows(a), cols(a), wants(a) || wants(b));
  vm(*this, y) = cvm(*this, a).cwiseQuotient(cvm(*this, b));
  steps_.push_back({y, [a, b, y](Tape& t) {
    if (t.wants(a)) gvm(t, a) += gvm(t, y).cwiseQuotient(cvm(t, b));
    if (t.wants(b))
      gvm(t, b) -=
          gvm(t, y).cwiseProduct(cvm(t, y)).cwiseQuotient(cvm(t, b));
  }});
  return y;
}

Tape::Id Tape::scale(Id x, float s) {
  const Id y = make(rows(x), cols(x), wants(x));
  vm(*this, y) = cvm(*this, x) * s;
  steps_.push_back({y, [x, y, s](Tape& t) {
    if (t.wants(x)) gvm(t, x) += gvm(t, y) * s;
  }});
  return y;
}

Tape::Id Tape::add_scalar(Id x, float s) {
  const Id y = make(rows(x), cols(x), wants(x));
  vm(*this, y) = cvm(*this, x).array() + s;
  steps_.push_back({y, [x, y](Tape& t) {
    if (t.wants(x)) gvm(t, x) += gvm(t, y);
  }});
  return y;
}

Tape::Id Tape::relu(Id x) {
  const Id y = make(rows(x), cols(x), wants(x));
  vm(*this, y) = cvm(*this, x).cwiseMax(0.0f);
  steps_.push_back({y, [x, y](Tape& t) {
    if (!t.wants(x)) return;
    const int64_t n = t.nodes_[x].t.size();
    const float* xv = t.cdata(x);
    const float* gy = t.gdata(y);
    float* gx = t.gdata(x);
    for (int64_t i = 0; i < n; ++i) gx[i] += xv[i] > 0.0f ? gy[i] : 0.0f;
  }});
  return y;
}

Tape::Id Tape::tanh_op(Id x) {
  const Id y = make(rows(x), cols(x), wants(x));
  vm(*this, y) = cvm(*this, x).array().tanh();
  steps_.push_back({y, [x, y](Tape& t) {
    if (!t.wants(x)) return;
    gvm(t, x).array() +=
        gvm(t, y).array() * (1.0f - cvm(t, y).array().square());
  }});
  return y;
}

Tape::Id Tape::sigmoid(Id x) {
  const Id y = make(rows(x), cols(x), wants(x));
  {
    const int64_t n = nodes_[x].t.size();
    const float* xv = cdata(x);
    float* yv = data(y);
    for (int64_t i = 0; i < n; ++i) yv[i] = stable_sigmoid(xv[i]);
  }
  steps_.push_back({y, [x, y](Tape& t) {
    if (!t.wants(x)) return;
    gvm(t, x).array() +=
        gvm(t, y).array() * cvm(t, y).array() * (1.0f - cvm(t, y).array());
  }});
  return y;
}

Tape::Id Tape::softplus(Id x) {
  const Id y = make(rows(x), cols(x), wants(x));
  {
    const int64_t n = nodes_[x].t.size();
    const float* xv = cdata(x);
    float* yv = data(y);
    for (int64_t i = 0; i < n; ++i)
      yv[i] = std::max(xv[i], 0.0f) + std::log1p(std::exp(-std::abs(xv[i])));
  }
  steps_.push_back({y, [x, y](Tape& t) {
    if (!t.wants(x)) return;
    const int64_t n = t.nodes_[x].t.size();
    const float* xv = t.cdata(x);
    const float* gy = t.gdata(y);
    float* gx = t.gdata(x);
    for (int64_t i = 0; i < n; ++i) gx[i] += gy[i] * stable_sigmoid(xv[i]);
  }});
  return y;
}

Tape::Id Tape::exp_op(Id x) {
  const Id y = make(rows(x), cols(x), wants(x));
  vm(*this, y) = cvm(*this, x).array().exp();
  steps_.push_back({y, [x, y](Tape& t) {
    if (t.wants(x))
      gvm(t, x).array() += gvm(t, y).array() * cvm(t, y).array();
  }});
  return y;
}

Tape::Id Tape::log_op(Id x) {
  const Id y = make(rows(x), cols(x), wants(x));
  vm(*this, y) = cvm(*this, x).array().log();
  steps_.push_back({y, [x, y](Tape& t) {
    if (t.wants(x))
      gvm(t, x).array() += gvm(t, y).array() / cvm(t, x).array();
  }});
  return y;
}

Tape::Id Tape::square(Id x) {
  const Id y = make(rows(x), cols(x), wants(x));
  vm(*this, y) = cvm(*this, x).array().square();
  steps_.push_back({y, [x, y](Tape& t) {
    if (t.wants(x))
      gvm(t, x).array() += 2.0f * gvm(t, y).array() * cvm(t, x).array();
  }});
  return y;
}

Tape::Id Tape::clamp(Id x, float lo, float hi) {
  const Id y = make(rows(x), cols(x), wants(x));
  vm(*this, y) = cvm(*this, x).cwiseMax(lo).cwiseMin(hi);
  steps_.push_back({y, [x, y, lo, hi](Tape& t) {
    if (!t.wants(x)) return;
    const int64_t n = t.nodes_[x].t.size();
    const float* xv = t.cdata(x);
    const float* gy = t.gdata(y);
    float* gx = t.gdata(x);
    for (int64_t i = 0; i < n; ++i)
      if (xv[i] >= lo && xv[i] <= hi) gx[i] += gy[i];
  }});
  return y;
}

Tape::Id Tape::min_elem(Id a, Id b) {
  check_same_shape(nodes_[a].t, nodes_[b].t, "min_elem");
  const Id y = make(rows(a), cols(a), wants(a) || wants(b));
  vm(*this, y) = cvm(*this, a).cwiseMin(cvm(*this, b));
  steps_.push_back({y, [a, b, y](Tape& t) {
    const int64_t n = t.nodes_[a].t.size();
    const float* av = t.cdata(a);
    const float* bv = t.cdata(b);
    const float* gy = t.gdata(y);
    float* ga = t.wants(a) ? t.gdata(a) : nullptr;
    float* gb = t.wants(b) ? t.gdata(b) : nullptr;
    for (int64_t i = 0; i < n; ++i) {
      if (av[i] <= bv[i]) {
        if (ga) ga[i] += gy[i];
      } else if (gb) {
        gb[i] += gy[i];
      }
    }
  }});
  return y;
}

// ---- shape -----------------------------------------------------------------

Tape::Id Tape::concat_rows(const std::vector<Id>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  const int b = cols(parts[0]);
  int total = 0;
  bool ng = false;
  for (Id p : parts) {
    if (cols(p) != b) throw std::invalid_argument("concat_rows: column mismatch");
    total += rows(p);
    ng = ng || wants(p);
  }
  const Id y = make(total, b, ng);
  int at = 0;
  for (Id p : parts) {
    vm(*this, y).middleRows(at, rows(p)) = cvm(*this, p);
    at += rows(p);
  }
  auto parts_copy = parts;
  steps_.push_back({y, [parts_copy, y](Tape& t) {
    int at2 = 0;
    for (Id p : parts_copy) {
      if (t.wants(p)) gvm(t, p) += gvm(t, y).middleRows(at2, t.rows(p));
      at2 += t.rows(p);
    }
  }});
  return y;
}

Tape::Id Tape::slice_rows(Id x, int row0, int nrows) {
  if (row0 < 0 || row0 + nrows > rows(x)) throw std::invalid_argument("slice_rows: range");
  const Id y = make(nrows, cols(x), wants(x));
  vm(*this, y) = cvm(*this, x).middleRows(row0, nrows);
  steps_.push_back({y, [x, y, row0, nrows](Tape& t) {
    if (t.wants(x)) gvm(t, x).middleRows(row0, nrows) += gvm(t, y);
  }});
  return y;
}

// ---- reductions ------------------------------------------------------------

Tape::Id Tape::sum_rows(Id x) {
  const Id y = make(1, cols(x), wants(x));
  vm(*this, y) = cvm(*this, x).colwise().sum();
  steps_.push_back({y, [x, y](Tape& t) {
    if (!t.wants(x)) return;
    gvm(t, x).array().rowwise() +=
        Eigen::Array<float, 1, Eigen::Dynamic>(gvm(t, y).row(0).array());
  }});
  return y;
}

Tape::Id Tape::mean_all(Id x) {
  const Id y = make(1, 1, wants(x));
  const int64_t n = nodes_[x].t.size();
  double acc = 0.0;
  const float* xv = cdata(x);
  for (int64_t i = 0; i < n; ++i) acc += xv[i];
  data(y)[0] = static_cast<float>(acc / static_cast<double>(n));
  steps_.push_back({y, [x, y, n](Tape& t) {
    if (!t.wants(x)) return;
    const float g = t.gdata(y)[0] / static_cast<float>(n);
    gvm(t, x).array() += g;
  }});
  return y;
}

// ---- linear algebra --------------------------------------------------------

Tape::Id Tape::matmul(Id a, Id b) {
  if (cols(a) != rows(b)) throw std::invalid_argument("matmul: inner dim mismatch");
  const Id y = make(rows(a), cols(b), wants(a) || wants(b));
  vm(*this, y).noalias() = cvm(*this, a) * cvm(*this, b);
  steps_.push_back({y, [a, b, y](Tape& t) {
    if (t.wants(a)) gvm(t, a).noalias() += gvm(t, y) * cvm(t, b).transpose();
    if (t.wants(b)) gvm(t, b).noalias() += cvm(t, a).transpose() * gvm(t, y);
  }});
  return y;
}

Tape::Id Tape::linear(Id w, Id x, Id b) {
  if (cols(w) != rows(x) || rows(b) != rows(w) || cols(b) != 1)
    throw std::invalid_argument("linear: shape mismatch");
  const Id y = make(rows(w), cols(x), wants(w) || wants(x) || wants(b));
  vm(*this, y).noalias() = cvm(*this, w) * cvm(*this, x);
  vm(*this, y).colwise() += Eigen::Map<const Eigen::VectorXf>(cdata(b), rows(b));
  steps_.push_back({y, [w, x, b, y](Tape& t) {
    if (t.wants(w)) gvm(t, w).noalias() += gvm(t, y) * cvm(t, x).transpose();
    if (t.wants(x)) gvm(t, x).noalias() += cvm(t, w).transpose() * gvm(t, y);
    if (t.wants(b))
      Eigen::Map<Eigen::VectorXf>(t.gdata(b), t.rows(b)) += gvm(t, y).rowwise().sum();
  }});
  return y;
}

// ---- conv / pool / norm ----------------------------------------------------

namespace {

// Gathers conv patches for one sample into cols [Cin*kh*kw x out_h*out_w].
void im2col(const float* x, const Conv2dSpec& s, float* cols) {
  const int oh = s.out_h(), ow = s.out_w();
  const int patch = s.in_channels * s.kernel_h * s.kernel_w;
  for (int ci = 0; ci < s.in_channels; ++ci) {
    for (int ky = 0; ky < s.kernel_h; ++ky) {
      for (int kx = 0; kx < s.kernel_w; ++kx) {
        const int row = (ci * s.kernel_h + ky) * s.kernel_w + kx;
        float* dst = cols + static_cast<size_t>(row) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s.stride_h - s.pad_h + ky;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s.stride_w - s.pad_w + kx;
            float v = 0.0f;
            if (iy >= 0 && iy < s.in_h && ix >= 0 && ix < s.in_w)
              v = x[(static_cast<size_t>(ci) * s.in_h + iy) * s.in_w + ix];
            dst[oy * ow + ox] = v;
          }
        }
      }
    }
  }
  (void)patch;
}

void col2im_add(const float* cols, const Conv2dSpec& s, float* dx) {
  const int oh = s.out_h(), ow = s.out_w();
  for (int ci = 0; ci < s.in_channels; ++ci) {
    for (int ky = 0; ky < s.kernel_h; ++ky) {
      for (int kx = 0; kx < s.kernel_w; ++kx) {
        const int row = (ci * s.kernel_h + ky) * s.kernel_w + kx;
        const float* src = cols + static_cast<size_t>(row) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s.stride_h - s.pad_h + ky;
          if (iy < 0 || iy >= s.in_h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s.stride_w - s.pad_w + kx;
            if (ix < 0 || ix >= s.in_w) continue;
            dx[(static_cast<size_t>(ci) * s.in_h + iy) * s.in_w + ix] += src[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tape::Id Tape::conv2d(Id x, Id w, Id b, const Conv2dSpec& spec) {
  const int batch = cols(x);
  const int in_size = spec.in_channels * spec.in_h * spec.in_w;
  const int patch = spec.in_channels * spec.kernel_h * spec.kernel_w;
  const int out_hw = spec.out_h() * spec.out_w();
  if (rows(x) != in_size || rows(w) != spec.out_channels || cols(w) != patch)
    throw std::invalid_argument("conv2d: shape mismatch");
  if (spec.out_h() <= 0 || spec.out_w() <= 0)
    throw std::invalid_argument("conv2d: empty output (input too small for kernel/stride)");

  const Id y = make(spec.out_channels * out_hw, batch, wants(w) || wants(x) || wants(b));

  std::vector<float> cols_buf(static_cast<size_t>(patch) * out_hw);
  const float* wv = cdata(w);
  const float* bv = cdata(b);
  for (int s = 0; s < batch; ++s) {
    // column s of x is the s-th image (strided view across the row dimension)
    std::vector<float> img(in_size);
    for (int i = 0; i < in_size; ++i) img[i] = cdata(x)[static_cast<size_t>(i) * batch + s];
    im2col(img.data(), spec, cols_buf.data());
    CMap wm(wv, spec.out_channels, patch);
    CMap cm(cols_buf.data(), patch, out_hw);
    Mat res = wm * cm;  // [Cout x out_hw]
    for (int co = 0; co < spec.out_channels; ++co)
      for (int p = 0; p < out_hw; ++p)
        data(y)[(static_cast<size_t>(co) * out_hw + p) * batch + s] = res(co, p) + bv[co];
  }

  steps_.push_back({y, [x, w, b, y, spec, batch, in_size, patch, out_hw](Tape& t) {
    std::vector<float> cols_buf2(static_cast<size_t>(patch) * out_hw);
    std::vector<float> img(in_size), dimg(in_size), dy_s(static_cast<size_t>(spec.out_channels) * out_hw);
    const bool need_dx = t.wants(x);
    for (int s = 0; s < batch; ++s) {
      for (int i = 0; i < in_size; ++i)
        img[i] = t.cdata(x)[static_cast<size_t>(i) * batch + s];
      im2col(img.data(), spec, cols_buf2.data());
      for (int i = 0; i < spec.out_channels * out_hw; ++i)
        dy_s[i] = t.gdata(y)[static_cast<size_t>(i) * batch + s];
      CMap dym(dy_s.data(), spec.out_channels, out_hw);
      CMap cm(cols_buf2.data(), patch, out_hw);
      if (t.wants(w)) {
        Map gw(t.gdata(w), spec.out_channels, patch);
        gw.noalias() += dym * cm.transpose();
      }
      if (t.wants(b)) {
        Eigen::Map<Eigen::VectorXf> gb(t.gdata(b), spec.out_channels);
        gb += dym.rowwise().sum();
      }
      if (need_dx) {
        CMap wm(t.cdata(w), spec.out_channels, patch);
        Mat dcols = wm.transpose() * dym;  // [patch x out_hw]
        std::fill(dimg.begin(), dimg.end(), 0.0f);
        col2im_add(dcols.data(), spec, dimg.data());
        for (int i = 0; i < in_size; ++i)
          t.gdata(x)[static_cast<size_t>(i) * batch + s] += dimg[i];
      }
    }
  }});
  return y;
}

Tape::Id Tape::maxpool2x2(Id x, int channels, int h, int w) {
  const int batch = cols(x);
  if (rows(x) != channels * h * w) throw std::invalid_argument("maxpool2x2: shape mismatch");
  const int oh = h / 2, ow = w / 2;
  const Id y = make(channels * oh * ow, batch, wants(x));
  auto argmax = std::make_shared<std::vector<int32_t>>(static_cast<size_t>(channels) * oh * ow * batch);
  for (int s = 0; s < batch; ++s) {
    for (int c = 0; c < channels; ++c) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          float best = -std::numeric_limits<float>::infinity();
          int best_idx = 0;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const int iy = oy * 2 + dy, ix = ox * 2 + dx;
              const int idx = (c * h + iy) * w + ix;
              const float v = cdata(x)[static_cast<size_t>(idx) * batch + s];
              if (v > best) {
                best = v;
                best_idx = idx;
              }
            }
          }
          const int oidx = (c * oh + oy) * ow + ox;
          data(y)[static_cast<size_t>(oidx) * batch + s] = best;
          (*argmax)[static_cast<size_t>(oidx) * batch + s] = best_idx;
        }
      }
    }
  }
  const int out_size = channels * oh * ow;
  steps_.push_back({y, [x, y, argmax, out_size, batch](Tape& t) {
    if (!t.wants(x)) return;
    for (int i = 0; i < out_size; ++i)
      for (int s = 0; s < batch; ++s)
        t.gdata(x)[static_cast<size_t>((*argmax)[static_cast<size_t>(i) * batch + s]) * batch + s] +=
            t.gdata(y)[static_cast<size_t>(i) * batch + s];
  }});
  return y;
}

Tape::Id Tape::global_avg_pool(Id x, int channels, int hw) {
  const int batch = cols(x);
  if (rows(x) != channels * hw) throw std::invalid_argument("global_avg_pool: shape mismatch");
  const Id y = make(channels, batch, wants(x));
  for (int c = 0; c < channels; ++c) {
    for (int s = 0; s < batch; ++s) {
      double acc = 0.0;
      for (int i = 0; i < hw; ++i)
        acc += cdata(x)[(static_cast<size_t>(c) * hw + i) * batch + s];
      data(y)[static_cast<size_t>(c) * batch + s] = static_cast<float>(acc / hw);
    }
  }
  steps_.push_back({y, [x, y, channels, hw, batch](Tape& t) {
    if (!t.wants(x)) return;
    for (int c = 0; c < channels; ++c)
      for (int s = 0; s < batch; ++s) {
        const float g = t.gdata(y)[static_cast<size_t>(c) * batch + s] / hw;
        for (int i = 0; i < hw; ++i)
          t.gdata(x)[(static_cast<size_t>(c) * hw + i) * batch + s] += g;
      }
  }});
  return y;
}

Tape::Id Tape::group_norm(Id x, Id gamma, Id beta, int groups, int channels, int hw) {
  const int batch = cols(x);
  if (rows(x) != channels * hw || channels % groups != 0)
    throw std::invalid_argument("group_norm: shape mismatch");
  const int gch = channels / groups;  // channels per group
  const int gsize = gch * hw;
  constexpr float kEps = 1e-5f;

  const Id y = make(channels * hw, batch, wants(x) || wants(gamma) || wants(beta));
  auto xhat = std::make_shared<std::vector<float>>(nodes_[x].t.v.size());
  auto istd = std::make_shared<std::vector<float>>(static_cast<size_t>(groups) * batch);

  for (int s = 0; s < batch; ++s) {
    for (int g = 0; g < groups; ++g) {
      double mean = 0.0, var = 0.0;
      for (int i = 0; i < gsize; ++i) {
        const int row = g * gsize + i;
        mean += cdata(x)[static_cast<size_t>(row) * batch + s];
      }
      mean /= gsize;
      for (int i = 0; i < gsize; ++i) {
        const int row = g * gsize + i;
        const double d = cdata(x)[static_cast<size_t>(row) * batch + s] - mean;
        var += d * d;
      }
      var /= gsize;
      const float is = 1.0f / std::sqrt(static_cast<float>(var) + kEps);
      (*istd)[static_cast<size_t>(g) * batch + s] = is;
      for (int i = 0; i < gsize; ++i) {
        const int row = g * gsize + i;
        const int c = row / hw;
        const float xh =
            (cdata(x)[static_cast<size_t>(row) * batch + s] - static_cast<float>(mean)) * is;
        (*xhat)[static_cast<size_t>(row) * batch + s] = xh;
        data(y)[static_cast<size_t>(row) * batch + s] = cdata(gamma)[c] * xh + cdata(beta)[c];
      }
    }
  }

  steps_.push_back({y, [x, gamma, beta, y, xhat, istd, groups, gch, hw, batch](Tape& t) {
    const int gsize = gch * hw;
    for (int s = 0; s < batch; ++s) {
      for (int g = 0; g < groups; ++g) {
        // dxhat = dy * gamma; dx = istd*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
        double m1 = 0.0, m2 = 0.0;
        for (int i = 0; i < gsize; ++i) {
          const int row = g * gsize + i;
          const int c = row / hw;
          const size_t idx = static_cast<size_t>(row) * batch + s;
          const float dxh = t.gdata(y)[idx] * t.cdata(gamma)[c];
          m1 += dxh;
          m2 += dxh * (*xhat)[idx];
        }
        m1 /= gsize;
        m2 /= gsize;
        const float is = (*istd)[static_cast<size_t>(g) * batch + s];
        for (int i = 0; i < gsize; ++i) {
          const int row = g * gsize + i;
          const int c = row / hw;
          const size_t idx = static_cast<size_t>(row) * batch + s;
          const float dxh = t.gdata(y)[idx] * t.cdata(gamma)[c];
          if (t.wants(x))
            t.gdata(x)[idx] += is * (dxh - static_cast<float>(m1) -
                                     (*xhat)[idx] * static_cast<float>(m2));
          if (t.wants(gamma)) t.gdata(gamma)[c] += t.gdata(y)[idx] * (*xhat)[idx];
          if (t.wants(beta)) t.gdata(beta)[c] += t.gdata(y)[idx];
        }
      }
    }
  }});
  return y;
}

// ---- tokens / attention ----------------------------------------------------

Tape::Id Tape::token_linear(Id x, Id w, Id b, int tokens) {
  const int d_in = cols(w);
  const int d_out = rows(w);
  if (rows(x) != tokens * d_in) throw std::invalid_argument("token_linear: shape mismatch");
  const int batch = cols(x);
  const Id y = make(tokens * d_out, batch, wants(x) || wants(w) || wants(b));
  for (int s = 0; s < tokens; ++s) {
    vm(*this, y).middleRows(s * d_out, d_out).noalias() =
        cvm(*this, w) * cvm(*this, x).middleRows(s * d_in, d_in);
    vm(*this, y).middleRows(s * d_out, d_out).colwise() +=
        Eigen::Map<const Eigen::VectorXf>(cdata(b), d_out);
  }
  steps_.push_back({y, [x, w, b, y, tokens, d_in, d_out](Tape& t) {
    for (int s = 0; s < tokens; ++s) {
      auto gy = gvm(t, y).middleRows(s * d_out, d_out);
      if (t.wants(w))
        gvm(t, w).noalias() += gy * cvm(t, x).middleRows(s * d_in, d_in).transpose();
      if (t.wants(x))
        gvm(t, x).middleRows(s * d_in, d_in).noalias() += cvm(t, w).transpose() * gy;
      if (t.wants(b))
        Eigen::Map<Eigen::VectorXf>(t.gdata(b), d_out) += gy.rowwise().sum();
    }
  }});
  return y;
}

Tape::Id Tape::token_mean(Id x, int tokens) {
  if (rows(x) % tokens != 0) throw std::invalid_argument("token_mean: shape mismatch");
  const int d = rows(x) / tokens;
  const Id y = make(d, cols(x), wants(x));
  vm(*this, y).setZero();
  for (int s = 0; s < tokens; ++s) vm(*this, y) += cvm(*this, x).middleRows(s * d, d);
  vm(*this, y) *= 1.0f / tokens;
  steps_.push_back({y, [x, y, tokens, d](Tape& t) {
    if (!t.wants(x)) return;
    for (int s = 0; s < tokens; ++s)
      gvm(t, x).middleRows(s * d, d) += gvm(t, y) * (1.0f / tokens);
  }});
  return y;
}

Tape::Id Tape::attention(Id q, Id k, Id v, int tokens, int dim) {
  if (dim <= 0) throw std::invalid_argument("attention: dim must be positive");
  const int batch = cols(q);
  if (rows(q) != dim || rows(k) != tokens * dim || rows(v) != tokens * dim ||
      cols(k) != batch || cols(v) != batch)
    throw std::invalid_argument("attention: shape mismatch");
  const Id y = make(dim, batch, wants(q) || wants(k) || wants(v));
  auto weights = std::make_shared<std::vector<float>>(static_cast<size_t>(tokens) * batch);
  const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(dim));

  for (int s = 0; s < batch; ++s) {
    float max_score = -std::numeric_limits<float>::infinity();
    std::vector<float> scores(tokens);
    for (int tok = 0; tok < tokens; ++tok) {
      float dot = 0.0f;
      for (int j = 0; j < dim; ++j)
        dot += cdata(q)[static_cast<size_t>(j) * batch + s] *
               cdata(k)[(static_cast<size_t>(tok) * dim + j) * batch + s];
      scores[tok] = dot * inv_sqrt_d;
      max_score = std::max(max_score, scores[tok]);
    }
    double denom = 0.0;
    for (int tok = 0; tok < tokens; ++tok) denom += std::exp(scores[tok] - max_score);
    for (int tok = 0; tok < tokens; ++tok)
      (*weights)[static_cast<size_t>(tok) * batch + s] =
          static_cast<float>(std::exp(scores[tok] - max_score) / denom);
    for (int j = 0; j < dim; ++j) {
      float acc = 0.0f;
      for (int tok = 0; tok < tokens; ++tok)
        acc += (*weights)[static_cast<size_t>(tok) * batch + s] *
               cdata(v)[(static_cast<size_t>(tok) * dim + j) * batch + s];
      data(y)[static_cast<size_t>(j) * batch + s] = acc;
    }
  }

  steps_.push_back({y, [q, k, v, y, weights, tokens, dim, batch, inv_sqrt_d](Tape& t) {
    std::vector<float> dw(tokens), dscore(tokens);
    for (int s = 0; s < batch; ++s) {
      double wdw = 0.0;
      for (int tok = 0; tok < tokens; ++tok) {
        float acc = 0.0f;
        for (int j = 0; j < dim; ++j)
          acc += t.gdata(y)[static_cast<size_t>(j) * batch + s] *
                 t.cdata(v)[(static_cast<size_t>(tok) * dim + j) * batch + s];
        dw[tok] = acc;
        wdw += static_cast<double>((*weights)[static_cast<size_t>(tok) * batch + s]) * acc;
      }
      for (int tok = 0; tok < tokens; ++tok) {
        const float wt = (*weights)[static_cast<size_t>(tok) * batch + s];
        dscore[tok] = wt * (dw[tok] - static_cast<float>(wdw));
      }
      for (int tok = 0; tok < tokens; ++tok) {
        const float wt = (*weights)[static_cast<size_t>(tok) * batch + s];
        for (int j = 0; j < dim; ++j) {
          const size_t kv_idx = (static_cast<size_t>(tok) * dim + j) * batch + s;
          const size_t q_idx = static_cast<size_t>(j) * batch + s;
          if (t.wants(v)) t.gdata(v)[kv_idx] += wt * t.gdata(y)[q_idx];
          if (t.wants(q))
            t.gdata(q)[q_idx] += dscore[tok] * t.cdata(k)[kv_idx] * inv_sqrt_d;
          if (t.wants(k))
            t.gdata(k)[kv_idx] += dscore[tok] * t.cdata(q)[q_idx] * inv_sqrt_d;
        }
      }
    }
  }});
  return y;
}

// ---- GRU -------------------------------------------------------------------

namespace {
struct GruCache {
  std::vector<float> r, z, n, m, hm;  // per-step gate values and masked h
};
}  // namespace

Tape::Id Tape::gru_step(Id x, Id h, const GruParams& p) {
  const int hidden = rows(h);
  const int batch = cols(x);
  if (rows(p.w_ih) != 3 * hidden || cols(p.w_ih) != rows(x) || cols(p.w_hh) != hidden ||
      cols(h) != batch)
    throw std::invalid_argument("gru_step: shape mismatch");

  const Id y = make(hidden, batch,
                    wants(x) || wants(h) || wants(p.w_ih) || wants(p.w_hh) || wants(p.b_ih) ||
                        wants(p.b_hh));
  auto cache = std::make_shared<GruCache>();
  const size_t hb = static_cast<size_t>(hidden) * batch;
  cache->r.resize(hb);
  cache->z.resize(hb);
  cache->n.resize(hb);
  cache->m.resize(hb);

  Mat gx = cvm(*this, p.w_ih) * cvm(*this, x);
  gx.colwise() += Eigen::Map<const Eigen::VectorXf>(cdata(p.b_ih), 3 * hidden);
  Mat gh = cvm(*this, p.w_hh) * cvm(*this, h);
  gh.colwise() += Eigen::Map<const Eigen::VectorXf>(cdata(p.b_hh), 3 * hidden);

  for (int i = 0; i < hidden; ++i) {
    for (int s = 0; s < batch; ++s) {
      const size_t idx = static_cast<size_t>(i) * batch + s;
      const float r = stable_sigmoid(gx(i, s) + gh(i, s));
      const float z = stable_sigmoid(gx(hidden + i, s) + gh(hidden + i, s));
      const float m = gh(2 * hidden + i, s);
      const float n = std::tanh(gx(2 * hidden + i, s) + r * m);
      cache->r[idx] = r;
      cache->z[idx] = z;
      cache->m[idx] = m;
      cache->n[idx] = n;
      data(y)[idx] = (1.0f - z) * n + z * cdata(h)[idx];
    }
  }

  steps_.push_back({y, [x, h, p, y, cache, hidden, batch](Tape& t) {
    const size_t hb = static_cast<size_t>(hidden) * batch;
    std::vector<float> dgx(3 * hb), dgh(3 * hb);
    for (int i = 0; i < hidden; ++i) {
      for (int s = 0; s < batch; ++s) {
        const size_t idx = static_cast<size_t>(i) * batch + s;
        const float dh_out = t.gdata(y)[idx];
        const float r = cache->r[idx], z = cache->z[idx], n = cache->n[idx], m = cache->m[idx];
        const float hv = t.cdata(h)[idx];
        const float dz = dh_out * (hv - n);
        const float dn = dh_out * (1.0f - z);
        const float dan = dn * (1.0f - n * n);
        const float dr = dan * m;
        const float dm = dan * r;
        const float daz = dz * z * (1.0f - z);
        const float dar = dr * r * (1.0f - r);
        dgx[idx] = dar;
        dgx[hb + idx] = daz;
        dgx[2 * hb + idx] = dan;
        dgh[idx] = dar;
        dgh[hb + idx] = daz;
        dgh[2 * hb + idx] = dm;
        if (t.wants(h)) t.gdata(h)[idx] += dh_out * z;
      }
    }
    CMap dgxm(dgx.data(), 3 * hidden, batch);
    CMap dghm(dgh.data(), 3 * hidden, batch);
    if (t.wants(p.w_ih))
      gvm(t, p.w_ih).noalias() += dgxm * cvm(t, x).transpose();
    if (t.wants(p.b_ih))
      Eigen::Map<Eigen::VectorXf>(t.gdata(p.b_ih), 3 * hidden) += dgxm.rowwise().sum();
    if (t.wants(x)) gvm(t, x).noalias() += cvm(t, p.w_ih).transpose() * dgxm;
    if (t.wants(p.w_hh))
      gvm(t, p.w_hh).noalias() += dghm * cvm(t, h).transpose();
    if (t.wants(p.b_hh))
      Eigen::Map<Eigen::VectorXf>(t.gdata(p.b_hh), 3 * hidden) += dghm.rowwise().sum();
    if (t.wants(h)) gvm(t, h).noalias() += cvm(t, p.w_hh).transpose() * dghm;
  }});
  return y;
}

Tape::Id Tape::gru_sequence(Id x, Id h0, const GruParams& p, std::span<const uint8_t> reset,
                            int T, int B) {
  const int hidden = rows(h0);
  const int in_dim = rows(x);
  if (cols(x) != T * B || cols(h0) != B || static_cast<int>(reset.size()) != T * B ||
      rows(p.w_ih) != 3 * hidden || cols(p.w_ih) != in_dim)
    throw std::invalid_argument("gru_sequence: shape mismatch");

  const Id y = make(hidden, T * B,
                    wants(x) || wants(p.w_ih) || wants(p.w_hh) || wants(p.b_ih) || wants(p.b_hh));

  // Wx for every step in one GEMM
  auto wx = std::make_shared<std::vector<float>>(static_cast<size_t>(3 * hidden) * T * B);
  {
    Map wxm(wx->data(), 3 * hidden, T * B);
    wxm.noalias() = cvm(*this, p.w_ih) * cvm(*this, x);
    wxm.colwise() += Eigen::Map<const Eigen::VectorXf>(cdata(p.b_ih), 3 * hidden);
  }

  auto cache = std::make_shared<GruCache>();
  const size_t hbt = static_cast<size_t>(hidden) * T * B;
  cache->r.resize(hbt);
  cache->z.resize(hbt);
  cache->n.resize(hbt);
  cache->m.resize(hbt);
  cache->hm.resize(hbt);

  std::vector<float> h(cdata(h0), cdata(h0) + static_cast<size_t>(hidden) * B);
  std::vector<float> gh(static_cast<size_t>(3 * hidden) * B);
  auto reset_copy = std::make_shared<std::vector<uint8_t>>(reset.begin(), reset.end());

  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < hidden; ++i)
      for (int s = 0; s < B; ++s)
        if ((*reset_copy)[static_cast<size_t>(t) * B + s])
          h[static_cast<size_t>(i) * B + s] = 0.0f;
    {
      Map ghm(gh.data(), 3 * hidden, B);
      ghm.noalias() = cvm(*this, p.w_hh) * CMap(h.data(), hidden, B);
      ghm.colwise() += Eigen::Map<const Eigen::VectorXf>(cdata(p.b_hh), 3 * hidden);
    }
    for (int i = 0; i < hidden; ++i) {
      for (int s = 0; s < B; ++s) {
        const size_t hcol = static_cast<size_t>(i) * B + s;
        const size_t cidx = static_cast<size_t>(i) * T * B + static_cast<size_t>(t) * B + s;
        const size_t wx_col = static_cast<size_t>(t) * B + s;
        const float gxr = (*wx)[static_cast<size_t>(i) * T * B + wx_col];
        const float gxz = (*wx)[(static_cast<size_t>(hidden) + i) * T * B + wx_col];
        const float gxn = (*wx)[(static_cast<size_t>(2 * hidden) + i) * T * B + wx_col];
        const float r = stable_sigmoid(gxr + gh[static_cast<size_t>(i) * B + s]);
        const float z = stable_sigmoid(gxz + gh[(static_cast<size_t>(hidden) + i) * B + s]);
        const float m = gh[(static_cast<size_t>(2 * hidden) + i) * B + s];
        const float n = std::tanh(gxn + r * m);
        cache->hm[cidx] = h[hcol];
        cache->r[cidx] = r;
        cache->z[cidx] = z;
        cache->m[cidx] = m;
        cache->n[cidx] = n;
        const float hnew = (1.0f - z) * n + z * h[hcol];
        h[hcol] = hnew;
        data(y)[static_cast<size_t>(i) * T * B + wx_col] = hnew;
      }
    }
  }

  steps_.push_back({y, [x, p, y, wx, cache, reset_copy, T, B, hidden](Tape& t) {
    const int in_dim = t.rows(x);
    // per-gate packed buffers over the whole sequence, filled in the BPTT loop
    std::vector<float> dwx(static_cast<size_t>(3 * hidden) * T * B, 0.0f);
    std::vector<float> dgh_all(static_cast<size_t>(3 * hidden) * T * B, 0.0f);
    std::vector<float> hm_all(static_cast<size_t>(hidden) * T * B);
    std::vector<float> dh(static_cast<size_t>(hidden) * B, 0.0f);
    std::vector<float> dgh(static_cast<size_t>(3 * hidden) * B);
    std::vector<float> dhm(static_cast<size_t>(hidden) * B);

    for (int step = T - 1; step >= 0; --step) {
      for (int i = 0; i < hidden; ++i) {
        for (int s = 0; s < B; ++s) {
          const size_t hcol = static_cast<size_t>(i) * B + s;
          const size_t cidx =
              static_cast<size_t>(i) * T * B + static_cast<size_t>(step) * B + s;
          const size_t col = static_cast<size_t>(step) * B + s;
          const float dh_total =
              dh[hcol] + t.gdata(y)[static_cast<size_t>(i) * T * B + col];
          const float r = cache->r[cidx], z = cache->z[cidx];
          const float n = cache->n[cidx], m = cache->m[cidx];
          const float hm = cache->hm[cidx];
          const float dz = dh_total * (hm - n);
          const float dn = dh_total * (1.0f - z);
          const float dan = dn * (1.0f - n * n);
          const float dr = dan * m;
          const float dm = dan * r;
          const float daz = dz * z * (1.0f - z);
          const float dar = dr * r * (1.0f - r);
          dwx[static_cast<size_t>(i) * T * B + col] = dar;
          dwx[(static_cast<size_t>(hidden) + i) * T * B + col] = daz;
          dwx[(static_cast<size_t>(2 * hidden) + i) * T * B + col] = dan;
          dgh[hcol] = dar;
          dgh[static_cast<size_t>(hidden) * B + hcol] = daz;
          dgh[static_cast<size_t>(2 * hidden) * B + hcol] = dm;
          dgh_all[static_cast<size_t>(i) * T * B + col] = dar;
          dgh_all[(static_cast<size_t>(hidden) + i) * T * B + col] = daz;
          dgh_all[(static_cast<size_t>(2 * hidden) + i) * T * B + col] = dm;
          hm_all[static_cast<size_t>(i) * T * B + col] = hm;
          dhm[hcol] = dh_total * z;
        }
      }
      // dh_prev = W_hh^T dgh + z*dh, masked by the reset flags of this step
      Map dhm_m(dhm.data(), hidden, B);
      dhm_m.noalias() += cvm(t, p.w_hh).transpose() * CMap(dgh.data(), 3 * hidden, B);
      for (int i = 0; i < hidden; ++i)
        for (int s = 0; s < B; ++s)
          dh[static_cast<size_t>(i) * B + s] =
              (*reset_copy)[static_cast<size_t>(step) * B + s]
                  ? 0.0f
                  : dhm[static_cast<size_t>(i) * B + s];
    }

    CMap dwxm(dwx.data(), 3 * hidden, T * B);
    CMap dghm(dgh_all.data(), 3 * hidden, T * B);
    CMap hmm(hm_all.data(), hidden, T * B);
    if (t.wants(p.w_ih))
      gvm(t, p.w_ih).noalias() += dwxm * cvm(t, x).transpose();
    if (t.wants(p.b_ih))
      Eigen::Map<Eigen::VectorXf>(t.gdata(p.b_ih), 3 * hidden) += dwxm.rowwise().sum();
    if (t.wants(x)) gvm(t, x).noalias() += cvm(t, p.w_ih).transpose() * dwxm;
    if (t.wants(p.w_hh)) gvm(t, p.w_hh).noalias() += dghm * hmm.transpose();
    if (t.wants(p.b_hh))
      Eigen::Map<Eigen::VectorXf>(t.gdata(p.b_hh), 3 * hidden) += dghm.rowwise().sum();
    (void)in_dim;
  }});
  return y;
}

// ---- backward --------------------------------------------------------------

void Tape::backward(Id root) {
  if (rows(root) != 1 || cols(root) != 1)
    throw std::invalid_argument("backward: root must be a 1x1 scalar");
  gdata(root)[0] = 1.0f;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) it->back(*this);
  for (auto& node : nodes_) {
    if (node.bound && !node.t.g.empty()) {
      node.bound->ensure_grad();
      for (size_t i = 0; i < node.t.g.size(); ++i) node.bound->g[i] += node.t.g[i];
    }
  }
}

}  // namespace contextnav::nn
