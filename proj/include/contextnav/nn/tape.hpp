#pragma once

#include <functional>
#include <span>
#include <vector>

#include "contextnav/nn/tensor.hpp"

namespace contextnav::nn {

struct Conv2dSpec {
  int in_channels = 1, in_h = 1, in_w = 1;
  int out_channels = 1;
  int kernel_h = 3, kernel_w = 3;
  int stride_h = 1, stride_w = 1;
  int pad_h = 0, pad_w = 0;

  int out_h() const { return (in_h + 2 * pad_h - kernel_h) / stride_h + 1; }
  int out_w() const { return (in_w + 2 * pad_w - kernel_w) / stride_w + 1; }
};

// Dynamic computation graph over 2-D [rows x cols] float matrices, columns
// being the batch. Built forward per pass, freed when the tape dies.
// Parameter leaves accumulate their gradients into Tensor::g on backward().
class Tape {
 public:
  using Id = int;

  Id param(Tensor& p);
  Id input(std::span<const float> data, int rows, int cols);
  Id input(const std::vector<float>& data, int rows, int cols) {
    return input(std::span<const float>(data.data(), data.size()), rows, cols);
  }

  // elementwise
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);
  Id div(Id a, Id b);
  Id scale(Id x, float s);
  Id add_scalar(Id x, float s);
  Id relu(Id x);
  Id tanh_op(Id x);
  Id sigmoid(Id x);
  Id softplus(Id x);
  Id exp_op(Id x);
  Id log_op(Id x);
  Id square(Id x);
  Id clamp(Id x, float lo, float hi);
  Id min_elem(Id a, Id b);

  // shape
  Id concat_rows(const std::vector<Id>& parts);
  Id slice_rows(Id x, int row0, int nrows);

  // reductions
  Id sum_rows(Id x);   // [R x B] -> [1 x B]
  Id mean_all(Id x);   // -> [1 x 1], double accumulation

  // linear algebra / nn
  Id matmul(Id a, Id b);
  Id linear(Id w, Id x, Id b);  // w[m x k] * x[k x B] + b[m x 1] broadcast
  Id conv2d(Id x, Id w, Id b, const Conv2dSpec& spec);
  Id maxpool2x2(Id x, int channels, int h, int w);
  Id global_avg_pool(Id x, int channels, int hw);
  Id group_norm(Id x, Id gamma, Id beta, int groups, int channels, int hw);

  // tokens: features [S*d x B] seen as S tokens of width d per sample
  Id token_linear(Id x, Id w, Id b, int tokens);  // per-token shared linear
  Id token_mean(Id x, int tokens);                // [S*d x B] -> [d x B]

  // softmax((q . k_s)/sqrt(d)) mixture over S value tokens
  Id attention(Id q, Id k, Id v, int tokens, int dim);

  struct GruParams {
    Id w_ih, w_hh, b_ih, b_hh;  // [3H x in], [3H x H], [3H x 1], [3H x 1]; gate order r,z,n
  };
  Id gru_step(Id x, Id h, const GruParams& p);
  // Full unrolled sequence: x [in x T*B] (column t*B+b), h0 [H x B].
  // reset[t*B+b] == 1 zeroes the carried state before consuming step t.
  Id gru_sequence(Id x, Id h0, const GruParams& p, std::span<const uint8_t> reset, int T, int B);

  void backward(Id root);  // root must be 1x1

  const Tensor& val(Id id) const { return nodes_[id].t; }
  int rows(Id id) const { return nodes_[id].t.rows(); }
  int cols(Id id) const { return nodes_[id].t.cols(); }
  size_t node_count() const { return nodes_.size(); }

  // raw access used by the op implementations
  bool wants(Id id) const { return nodes_[id].needs_grad; }
  float* data(Id id) { return nodes_[id].t.v.data(); }
  const float* cdata(Id id) const { return nodes_[id].t.v.data(); }
  float* gdata(Id id) {
    nodes_[id].t.ensure_grad();
    return nodes_[id].t.g.data();
  }

 private:
  struct Node {
    Tensor t;
    Tensor* bound = nullptr;  // parameter leaf
    bool needs_grad = false;
  };
  struct Step {
    Id out;
    std::function<void(Tape&)> back;
  };

  Id make(int rows, int cols, bool needs_grad);

  std::vector<Node> nodes_;
  std::vector<Step> steps_;
};

}  // namespace contextnav::nn
