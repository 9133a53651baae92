#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "resil/errors.hpp"
#include "resil/sampling.hpp"

namespace resil {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Feed-forward classifier: input batch normalization, rectifier hidden
/// layers, sigmoid outputs (one per component; < 0.5 reads as failed).
class SurrogateNet {
 public:
  using Matrix = Eigen::MatrixXd;
  using Vector = Eigen::VectorXd;
  using RowVector = Eigen::RowVectorXd;

  SurrogateNet() = default;

  SurrogateNet(std::size_t n_inputs, std::vector<std::size_t> hidden, std::size_t n_outputs, std::uint64_t seed) {
    if (n_inputs == 0 || n_outputs == 0) throw DomainError("surrogate: input and output sizes must be positive");
    sizes_.push_back(n_inputs);
    for (auto h : hidden) {
      if (h == 0) throw DomainError("surrogate: hidden widths must be positive");
      sizes_.push_back(h);
    }
    sizes_.push_back(n_outputs);
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const auto in = static_cast<Eigen::Index>(sizes_[l]);
      const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
      const bool last = l + 2 == sizes_.size();
      // He-uniform for rectifier layers, Glorot-uniform for the output.
      const double lim = last ? std::sqrt(6.0 / static_cast<double>(in + out)) : std::sqrt(6.0 / static_cast<double>(in));
      Matrix W(out, in);
      for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = (2.0 * rng.uniform() - 1.0) * lim;
      weights_.push_back(W);
      biases_.push_back(Vector::Zero(out));
    }
    const auto d = static_cast<Eigen::Index>(n_inputs);
    bn_gamma_ = Vector::Ones(d);
    bn_beta_ = Vector::Zero(d);
    bn_mean_ = Vector::Zero(d);
    bn_var_ = Vector::Ones(d);
  }

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t n_inputs() const noexcept { return sizes_.front(); }
  std::size_t n_outputs() const noexcept { return sizes_.back(); }
  std::size_t n_parameters() const {
    std::size_t n = 2 * sizes_.front();
    for (std::size_t l = 0; l < weights_.size(); ++l) n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
    return n;
  }

  /// Normalization statistics used at inference.
  void set_input_statistics(const Vector& mean, const Vector& var) {
    bn_mean_ = mean;
    bn_var_ = var;
  }

  /// Inference: rows of X in, rows of sigmoid outputs out.
  Matrix predict(const Matrix& X) const {
    check_input(X);
    Matrix h = normalize(X, bn_mean_, bn_var_);
    return forward_from(h, nullptr);
  }

  // ---- training ----------------------------------------------------------

  struct Gradients {
    Vector d_gamma, d_beta;
    std::vector<Matrix> d_weights;
    std::vector<Vector> d_biases;
  };

  /// Mean per-component binary cross-entropy on a batch using batch
  /// statistics for the input normalization; fills gradients if asked.
  double batch_loss(const Matrix& X, const Matrix& T, Gradients* grads) const {
    check_input(X);
    if (T.rows() != X.rows() || T.cols() != static_cast<Eigen::Index>(n_outputs())) {
      throw DomainError("surrogate: label matrix shape mismatch");
    }
    const double B = static_cast<double>(X.rows());
    const RowVector mu = X.colwise().mean();
    const Matrix Xc = X.rowwise() - mu;
    const RowVector var = Xc.array().square().colwise().mean();
    const RowVector inv_std = (var.array() + kBnEps).rsqrt();
    const Matrix xhat = Xc.array().rowwise() * inv_std.array();
    const Matrix y = (xhat.array().rowwise() * bn_gamma_.transpose().array()).rowwise() + bn_beta_.transpose().array();

    std::vector<Matrix> acts;  // post-activation of each layer, acts[0] = y
    const Matrix logits = forward_from(y, &acts);
    // Stable BCE on logits: softplus(z) - t z.
    const Matrix z = logits;
    const double loss =
        ((z.array().max(0.0) + (-z.array().abs()).exp().log1p()) - T.array() * z.array()).sum() /
        (B * static_cast<double>(n_outputs()));
    if (!grads) return loss;

    const std::size_t L = weights_.size();
    grads->d_weights.assign(L, Matrix());
    grads->d_biases.assign(L, Vector());
    Matrix delta = (sigmoid(z) - T) / (B * static_cast<double>(n_outputs()));
    for (std::size_t l = L; l-- > 0;) {
      grads->d_weights[l] = delta.transpose() * acts[l];
      grads->d_biases[l] = delta.colwise().sum().transpose();
      Matrix back = delta * weights_[l];
      if (l > 0) back = back.array() * (acts[l].array() > 0.0).cast<double>();
      delta = std::move(back);
    }
    // delta is now dL/dy for the normalized input.
    grads->d_beta = delta.colwise().sum().transpose();
    grads->d_gamma = (delta.array() * xhat.array()).colwise().sum().transpose();
    return loss;
  }

  /// Flattened parameter view (gamma, beta, then per layer W row-major, b).
  std::vector<double> parameters() const {
    std::vector<double> p;
    append(p, bn_gamma_);
    append(p, bn_beta_);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      append_rowmajor(p, weights_[l]);
      append(p, biases_[l]);
    }
    return p;
  }
  void set_parameters(const std::vector<double>& p) {
    if (p.size() != n_parameters()) throw DomainError("surrogate: parameter vector size mismatch");
    std::size_t k = 0;
    read(p, k, bn_gamma_);
    read(p, k, bn_beta_);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      read_rowmajor(p, k, weights_[l]);
      read(p, k, biases_[l]);
    }
  }
  static std::vector<double> flatten(const Gradients& g) {
    std::vector<double> p;
    append(p, g.d_gamma);
    append(p, g.d_beta);
    for (std::size_t l = 0; l < g.d_weights.size(); ++l) {
      append_rowmajor(p, g.d_weights[l]);
      append(p, g.d_biases[l]);
    }
    return p;
  }

  // ---- persistence -------------------------------------------------------

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["layer_sizes"] = sizes_;
    j["batch_norm"] = {{"gamma", vec(bn_gamma_)}, {"beta", vec(bn_beta_)},
                       {"mean", vec(bn_mean_)},   {"var", vec(bn_var_)}};
    j["layers"] = nlohmann::json::array();
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      std::vector<double> w;
      append_rowmajor(w, weights_[l]);
      j["layers"].push_back({{"weights", w}, {"bias", vec(biases_[l])}});
    }
    return j;
  }

  static SurrogateNet from_json(const nlohmann::json& j) {
    SurrogateNet n;
    try {
      n.sizes_ = j.at("layer_sizes").get<std::vector<std::size_t>>();
      if (n.sizes_.size() < 2) throw ConfigError("surrogate weights: need at least two layer sizes");
      const auto& bn = j.at("batch_norm");
      n.bn_gamma_ = from_vec(bn.at("gamma").get<std::vector<double>>());
      n.bn_beta_ = from_vec(bn.at("beta").get<std::vector<double>>());
      n.bn_mean_ = from_vec(bn.at("mean").get<std::vector<double>>());
      n.bn_var_ = from_vec(bn.at("var").get<std::vector<double>>());
      const auto& layers = j.at("layers");
      if (layers.size() + 1 != n.sizes_.size()) throw ConfigError("surrogate weights: layer count mismatch");
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(n.sizes_[l]);
        const auto out = static_cast<Eigen::Index>(n.sizes_[l + 1]);
        const auto w = layers[l].at("weights").get<std::vector<double>>();
        const auto b = layers[l].at("bias").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out) {
          throw ConfigError("surrogate weights: block size mismatch in layer " + std::to_string(l));
        }
        Matrix W(out, in);
        std::size_t k = 0;
        read_rowmajor(w, k, W);
        n.weights_.push_back(W);
        n.biases_.push_back(from_vec(b));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("surrogate weights: ") + e.what());
    }
    if (n.bn_gamma_.size() != static_cast<Eigen::Index>(n.sizes_.front())) {
      throw ConfigError("surrogate weights: batch-norm size mismatch");
    }
    return n;
  }

  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write surrogate weights to " + path);
    f << to_json().dump(1);
    if (!f) throw IoError("failed writing surrogate weights to " + path);
  }
  static SurrogateNet load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read surrogate weights from " + path);
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("surrogate weights: " + std::string(e.what()));
    }
    return from_json(j);
  }

  friend class SurrogateTrainer;

 private:
  static constexpr double kBnEps = 1e-5;

  static Matrix sigmoid(const Matrix& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

  Matrix normalize(const Matrix& X, const Vector& mean, const Vector& var) const {
    const RowVector inv_std = (var.array() + kBnEps).rsqrt().transpose();
    Matrix h = (X.rowwise() - mean.transpose()).array().rowwise() * inv_std.array();
    return (h.array().rowwise() * bn_gamma_.transpose().array()).rowwise() + bn_beta_.transpose().array();
  }

  /// From normalized input; returns logits when acts is given (training),
  /// sigmoid outputs otherwise.
  Matrix forward_from(const Matrix& y, std::vector<Matrix>* acts) const {
    Matrix h = y;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      if (acts) acts->push_back(h);
      Matrix z = (h * weights_[l].transpose()).rowwise() + biases_[l].transpose();
      if (l + 1 < weights_.size()) {
        h = z.array().max(0.0);
      } else {
        h = std::move(z);
      }
    }
    return acts ? h : sigmoid(h);
  }

  void check_input(const Matrix& X) const {
    if (sizes_.empty()) throw DomainError("surrogate: network not initialized");
    if (X.cols() != static_cast<Eigen::Index>(n_inputs())) throw DomainError("surrogate: input width mismatch");
  }

  static void append(std::vector<double>& p, const Vector& v) { p.insert(p.end(), v.data(), v.data() + v.size()); }
  static void append_rowmajor(std::vector<double>& p, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) p.push_back(m(i, j));
    }
  }
  static void read(const std::vector<double>& p, std::size_t& k, Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = p[k++];
  }
  static void read_rowmajor(const std::vector<double>& p, std::size_t& k, Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = p[k++];
    }
  }
  static std::vector<double> vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }
  static Vector from_vec(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  std::vector<std::size_t> sizes_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
  Vector bn_gamma_, bn_beta_, bn_mean_, bn_var_;
};

/// Mini-batch Adam on mean binary cross-entropy. Keeps optimizer state, so
/// repeated train() calls continue from where the last one stopped.
class SurrogateTrainer {
 public:
  explicit SurrogateTrainer(AdamOptions opt = {}, std::size_t batch_size = 20) : opt_(opt), batch_(batch_size) {
    if (batch_ == 0) throw ConfigError("surrogate: batch_size must be positive");
  }

  /// Returns the mean training loss of every epoch.
  std::vector<double> train(SurrogateNet& net, const Eigen::MatrixXd& X, const Eigen::MatrixXd& T, std::size_t epochs,
                            std::uint64_t seed) {
    if (X.rows() == 0) throw DomainError("surrogate training: empty dataset");
    if ((T.array() != 0.0 && T.array() != 1.0).any()) throw DomainError("surrogate training: labels must be 0 or 1");
    if (init_ && m_.d_gamma.size() != static_cast<Eigen::Index>(net.n_inputs())) {
      throw DomainError("surrogate training: trainer state belongs to a different network");
    }
    // Inference statistics: the dataset itself is the input distribution.
    const Eigen::RowVectorXd mu = X.colwise().mean();
    const Eigen::RowVectorXd var = (X.rowwise() - mu).array().square().colwise().mean();
    net.set_input_statistics(mu.transpose(), var.transpose());

    Rng rng(seed);
    const std::size_t n = static_cast<std::size_t>(X.rows());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<double> history;
    history.reserve(epochs);
    for (std::size_t e = 0; e < epochs; ++e) {
      std::shuffle(idx.begin(), idx.end(), rng.engine());
      double total = 0.0;
      std::size_t start = 0;
      while (start < n) {
        std::size_t end = std::min(n, start + batch_);
        if (n - end < 2) end = n;  // batch statistics need at least two rows
        const auto rows = static_cast<Eigen::Index>(end - start);
        Eigen::MatrixXd xb(rows, X.cols());
        Eigen::MatrixXd tb(rows, T.cols());
        for (Eigen::Index r = 0; r < rows; ++r) {
          xb.row(r) = X.row(static_cast<Eigen::Index>(idx[start + static_cast<std::size_t>(r)]));
          tb.row(r) = T.row(static_cast<Eigen::Index>(idx[start + static_cast<std::size_t>(r)]));
        }
        SurrogateNet::Gradients g;
        const double loss = net.batch_loss(xb, tb, &g);
        if (!std::isfinite(loss)) throw ConvergenceError("surrogate training diverged (non-finite loss)");
        total += loss * static_cast<double>(rows);
        step(net, g);
        start = end;
      }
      history.push_back(total / static_cast<double>(n));
    }
    return history;
  }

 private:
  template <class P>
  void update(P& param, const P& grad, P& m, P& v, double c1, double c2) const {
    m = opt_.beta1 * m + (1.0 - opt_.beta1) * grad;
    v = opt_.beta2 * v + (1.0 - opt_.beta2) * grad.cwiseProduct(grad);
    param.array() -= opt_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + opt_.epsilon);
  }

  void step(SurrogateNet& net, const SurrogateNet::Gradients& g) {
    if (!init_) {
      m_ = g;
      v_ = g;
      zero(m_);
      zero(v_);
      init_ = true;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    update(net.bn_gamma_, g.d_gamma, m_.d_gamma, v_.d_gamma, c1, c2);
    update(net.bn_beta_, g.d_beta, m_.d_beta, v_.d_beta, c1, c2);
    for (std::size_t l = 0; l < g.d_weights.size(); ++l) {
      update(net.weights_[l], g.d_weights[l], m_.d_weights[l], v_.d_weights[l], c1, c2);
      update(net.biases_[l], g.d_biases[l], m_.d_biases[l], v_.d_biases[l], c1, c2);
    }
  }

  static void zero(SurrogateNet::Gradients& g) {
    g.d_gamma.setZero();
    g.d_beta.setZero();
    for (auto& w : g.d_weights) w.setZero();
    for (auto& b : g.d_biases) b.setZero();
  }

  AdamOptions opt_;
  std::size_t batch_;
  SurrogateNet::Gradients m_, v_;
  bool init_ = false;
  std::size_t t_ = 0;
};

}  // namespace resil
