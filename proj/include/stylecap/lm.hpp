#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <type_traits>
#include <vector>

#include "stylecap/errors.hpp"
#include "stylecap/random.hpp"
#include "stylecap/vocabulary.hpp"

namespace stylecap {

// Layer sizes of the feed-forward conditional LM. The hidden layer reads the
// embeddings of `context` most recent tokens, the embeddings of the first
// `memory` tokens of the sequence, and the condition vector.
struct LmShape {
  int vocab = 0;
  int embed = 16;
  int context = 4;
  int memory = 12;
  int cond = 16;
  int hidden = 64;

  int slots() const noexcept { return context + memory; }
  int input_dim() const noexcept { return slots() * embed + cond; }

  friend bool operator==(const LmShape&, const LmShape&) = default;
};

template <typename Scalar>
struct LmParameters {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  Matrix embedding;       // vocab x embed
  Matrix hidden_weight;   // input_dim x hidden
  RowVector hidden_bias;  // 1 x hidden
  Matrix output_weight;   // hidden x vocab
  RowVector output_bias;  // 1 x vocab

  static LmParameters zeros(const LmShape& s) {
    return {Matrix::Zero(s.vocab, s.embed), Matrix::Zero(s.input_dim(), s.hidden),
            RowVector::Zero(s.hidden), Matrix::Zero(s.hidden, s.vocab), RowVector::Zero(s.vocab)};
  }

  friend bool operator==(const LmParameters& a, const LmParameters& b) {
    auto same = [](const auto& x, const auto& y) {
      return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
    };
    return same(a.embedding, b.embedding) && same(a.hidden_weight, b.hidden_weight) &&
           same(a.hidden_bias, b.hidden_bias) && same(a.output_weight, b.output_weight) &&
           same(a.output_bias, b.output_bias);
  }
};

// Calls fn(name, tensor_from_each_bundle...) for every parameter tensor, in
// checkpoint order. Bundles may mix const and non-const.
template <typename Fn, typename... Bundles>
void zip_tensors(Fn&& fn, Bundles&... bundles) {
  fn(std::string_view("embedding"), bundles.embedding...);
  fn(std::string_view("hidden_weight"), bundles.hidden_weight...);
  fn(std::string_view("hidden_bias"), bundles.hidden_bias...);
  fn(std::string_view("output_weight"), bundles.output_weight...);
  fn(std::string_view("output_bias"), bundles.output_bias...);
}

template <typename Scalar>
std::size_t parameter_count(const LmParameters<Scalar>& p) {
  std::size_t n = 0;
  zip_tensors([&](std::string_view, const auto& t) { n += static_cast<std::size_t>(t.size()); }, p);
  return n;
}

template <typename Scalar>
bool all_finite(const LmParameters<Scalar>& p) {
  bool ok = true;
  zip_tensors([&](std::string_view, const auto& t) { ok = ok && t.allFinite(); }, p);
  return ok;
}

template <typename Scalar>
struct BasicConditionalLm {
  LmShape shape;
  Vocabulary vocab;
  LmParameters<Scalar> params;

  friend bool operator==(const BasicConditionalLm&, const BasicConditionalLm&) = default;
};

using ConditionalLm = BasicConditionalLm<double>;

// All-zero parameters; the model predicts the uniform distribution.
template <typename Scalar>
BasicConditionalLm<Scalar> make_zero_model(Vocabulary vocab, LmShape shape) {
  shape.vocab = static_cast<int>(vocab.size());
  auto params = LmParameters<Scalar>::zeros(shape);
  return {shape, std::move(vocab), std::move(params)};
}

// Embeddings ~ N(0, 1); weight matrices ~ N(0, 1/fan_in); biases zero.
template <typename Scalar>
BasicConditionalLm<Scalar> make_random_model(Vocabulary vocab, LmShape shape, Rng& rng) {
  auto model = make_zero_model<Scalar>(std::move(vocab), shape);
  auto& p = model.params;
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](auto& m, double scale) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(scale * normal(rng));
  };
  fill(p.embedding, 1.0);
  fill(p.hidden_weight, 1.0 / std::sqrt(static_cast<double>(model.shape.input_dim())));
  fill(p.output_weight, 1.0 / std::sqrt(static_cast<double>(model.shape.hidden)));
  return model;
}

// Slot layout fed to the model for the next prediction after `history`:
// the last `context` tokens (left-padded with BOS), then the first `memory`
// tokens of the sequence (right-padded with BOS).
inline std::vector<TokenId> make_context(std::span<const TokenId> history, const LmShape& shape) {
  std::vector<TokenId> ids(static_cast<std::size_t>(shape.slots()), kBos);
  const auto n = static_cast<std::ptrdiff_t>(history.size());
  for (int k = 0; k < shape.context; ++k) {
    const std::ptrdiff_t src = n - shape.context + k;
    if (src >= 0) ids[static_cast<std::size_t>(k)] = history[static_cast<std::size_t>(src)];
  }
  for (int j = 0; j < shape.memory && j < n; ++j) {
    ids[static_cast<std::size_t>(shape.context + j)] = history[static_cast<std::size_t>(j)];
  }
  return ids;
}

// A batch of (context slots, condition, next token) triples, one per row.
template <typename Scalar>
struct TrainingBatch {
  using IdMatrix = Eigen::Matrix<TokenId, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  IdMatrix contexts;  // rows x slots
  Matrix conds;       // rows x cond
  std::vector<TokenId> targets;

  Eigen::Index rows() const noexcept { return static_cast<Eigen::Index>(targets.size()); }
};

// A token sequence (without BOS/EOS) paired with its condition vector.
template <typename Scalar>
struct ConditionedSequence {
  std::vector<TokenId> tokens;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> cond;
};

// Every next-token triple of each sequence, EOS appended as the final target.
template <typename Scalar>
TrainingBatch<Scalar> make_batch(std::span<const ConditionedSequence<Scalar>* const> sequences,
                                 const LmShape& shape) {
  std::size_t rows = 0;
  for (const auto* s : sequences) rows += s->tokens.size() + 1;
  TrainingBatch<Scalar> b;
  b.contexts.resize(static_cast<Eigen::Index>(rows), shape.slots());
  b.conds.resize(static_cast<Eigen::Index>(rows), shape.cond);
  b.targets.reserve(rows);
  Eigen::Index r = 0;
  for (const auto* seq : sequences) {
    const auto& tokens = seq->tokens;
    if (seq->cond.size() != shape.cond) throw DimensionMismatch("condition vector length");
    for (std::size_t t = 0; t <= tokens.size(); ++t, ++r) {
      const auto ctx = make_context(std::span(tokens.data(), t), shape);
      for (int k = 0; k < shape.slots(); ++k) b.contexts(r, k) = ctx[static_cast<std::size_t>(k)];
      b.conds.row(r) = seq->cond.transpose();
      b.targets.push_back(t < tokens.size() ? tokens[t] : kEos);
    }
  }
  return b;
}

template <typename Scalar>
TrainingBatch<Scalar> make_batch(std::span<const ConditionedSequence<Scalar>> sequences,
                                 const LmShape& shape) {
  std::vector<const ConditionedSequence<Scalar>*> ptrs;
  ptrs.reserve(sequences.size());
  for (const auto& s : sequences) ptrs.push_back(&s);
  return make_batch<Scalar>(std::span<const ConditionedSequence<Scalar>* const>(ptrs), shape);
}

namespace detail {

template <typename Scalar>
using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct Activations {
  RowMajorMatrix<Scalar> input;   // rows x input_dim
  RowMajorMatrix<Scalar> hidden;  // rows x hidden, after tanh
  RowMajorMatrix<Scalar> log_probs;
};

template <typename Scalar>
Activations<Scalar> forward_batch(const BasicConditionalLm<Scalar>& model,
                                  const TrainingBatch<Scalar>& batch) {
  const auto& s = model.shape;
  const auto& p = model.params;
  const Eigen::Index n = batch.contexts.rows();
  if (batch.contexts.cols() != s.slots() || batch.conds.cols() != s.cond ||
      batch.conds.rows() != n) {
    throw DimensionMismatch("batch does not match model shape");
  }
  Activations<Scalar> a;
  a.input.resize(n, s.input_dim());
  for (Eigen::Index r = 0; r < n; ++r) {
    for (int k = 0; k < s.slots(); ++k) {
      const TokenId id = batch.contexts(r, k);
      if (id < 0 || id >= s.vocab) throw DimensionMismatch("token id outside vocabulary");
      a.input.row(r).segment(k * s.embed, s.embed) = p.embedding.row(id);
    }
  }
  a.input.rightCols(s.cond) = batch.conds;

  a.hidden.noalias() = a.input * p.hidden_weight;
  a.hidden.rowwise() += p.hidden_bias;
  a.hidden = a.hidden.array().tanh();

  a.log_probs.noalias() = a.hidden * p.output_weight;
  a.log_probs.rowwise() += p.output_bias;
  const auto row_max = a.log_probs.rowwise().maxCoeff().eval();
  a.log_probs.colwise() -= row_max;
  const auto log_norm = a.log_probs.array().exp().rowwise().sum().log().matrix().eval();
  a.log_probs.colwise() -= log_norm;
  return a;
}

}  // namespace detail

// Next-token distribution for one context (slots as built by make_context).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> forward(const BasicConditionalLm<Scalar>& model,
                                                 std::span<const TokenId> context_ids,
                                                 const std::type_identity_t<Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>>& cond) {
  const auto& s = model.shape;
  if (static_cast<int>(context_ids.size()) != s.slots()) {
    throw DimensionMismatch("context has " + std::to_string(context_ids.size()) + " ids, model expects " +
                            std::to_string(s.slots()));
  }
  if (cond.size() != s.cond) throw DimensionMismatch("condition vector length");
  TrainingBatch<Scalar> batch;
  batch.contexts.resize(1, s.slots());
  for (int k = 0; k < s.slots(); ++k) batch.contexts(0, k) = context_ids[static_cast<std::size_t>(k)];
  batch.conds = cond.transpose();
  batch.targets = {kEos};
  const auto a = detail::forward_batch(model, batch);
  return a.log_probs.row(0).transpose().array().exp().matrix();
}

// Mean cross-entropy of the batch targets.
template <typename Scalar>
Scalar batch_loss(const BasicConditionalLm<Scalar>& model, const TrainingBatch<Scalar>& batch) {
  if (batch.rows() == 0) throw EmptyInput("empty batch");
  const auto a = detail::forward_batch(model, batch);
  Scalar total = 0;
  for (Eigen::Index r = 0; r < batch.rows(); ++r) total -= a.log_probs(r, batch.targets[static_cast<std::size_t>(r)]);
  return total / static_cast<Scalar>(batch.rows());
}

template <typename Scalar>
struct LossAndGradients {
  Scalar loss;
  LmParameters<Scalar> gradients;
};

// Mean cross-entropy and its exact gradient with respect to every parameter.
template <typename Scalar>
LossAndGradients<Scalar> loss_and_gradients(const BasicConditionalLm<Scalar>& model,
                                            const TrainingBatch<Scalar>& batch) {
  if (batch.rows() == 0) throw EmptyInput("empty batch");
  const auto& s = model.shape;
  const auto& p = model.params;
  const auto a = detail::forward_batch(model, batch);
  const Eigen::Index n = batch.rows();
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);

  LossAndGradients<Scalar> out{Scalar(0), LmParameters<Scalar>::zeros(s)};
  auto& g = out.gradients;

  // d(loss)/d(logits) = (softmax - onehot) / n
  detail::RowMajorMatrix<Scalar> d_logits = a.log_probs.array().exp();
  for (Eigen::Index r = 0; r < n; ++r) {
    const TokenId t = batch.targets[static_cast<std::size_t>(r)];
    out.loss -= a.log_probs(r, t);
    d_logits(r, t) -= Scalar(1);
  }
  out.loss *= inv_n;
  d_logits *= inv_n;

  g.output_weight.noalias() = a.hidden.transpose() * d_logits;
  g.output_bias = d_logits.colwise().sum();

  detail::RowMajorMatrix<Scalar> d_pre = d_logits * p.output_weight.transpose();
  d_pre.array() *= (Scalar(1) - a.hidden.array().square());

  g.hidden_weight.noalias() = a.input.transpose() * d_pre;
  g.hidden_bias = d_pre.colwise().sum();

  const int embedded = s.slots() * s.embed;
  const detail::RowMajorMatrix<Scalar> d_input =
      d_pre * p.hidden_weight.topRows(embedded).transpose();
  for (Eigen::Index r = 0; r < n; ++r) {
    for (int k = 0; k < s.slots(); ++k) {
      g.embedding.row(batch.contexts(r, k)) += d_input.row(r).segment(k * s.embed, s.embed);
    }
  }
  return out;
}

}  // namespace stylecap
