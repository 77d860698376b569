#ifndef PERFEXP_REGRESSOR_HPP
#define PERFEXP_REGRESSOR_HPP

#include "perfexp/error.hpp"
#include "perfexp/feature_matrix.hpp"
#include "perfexp/targets.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace perfexp {

// One LSTM direction. Gate rows are stacked as [input; forget; output; cell].
struct LstmBlock {
  Eigen::MatrixXd W; // 4H x D
  Eigen::MatrixXd U; // 4H x H
  Eigen::VectorXd b; // 4H
};

struct RegressorParams {
  LstmBlock fwd;
  LstmBlock bwd;
  Eigen::VectorXd w_out; // 2H, forward half first
  double b_out = 0.0;

  static RegressorParams zeros(int input_dim, int hidden) {
    RegressorParams p;
    for (LstmBlock *blk : {&p.fwd, &p.bwd}) {
      blk->W = Eigen::MatrixXd::Zero(4 * hidden, input_dim);
      blk->U = Eigen::MatrixXd::Zero(4 * hidden, hidden);
      blk->b = Eigen::VectorXd::Zero(4 * hidden);
    }
    p.w_out = Eigen::VectorXd::Zero(2 * hidden);
    return p;
  }

  std::size_t size() const {
    return static_cast<std::size_t>(2 * (fwd.W.size() + fwd.U.size() + fwd.b.size()) +
                                    w_out.size() + 1);
  }

  // Flat view in a fixed order: fwd (W, U, b), bwd (W, U, b), w_out, b_out.
  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
    Eigen::Index k = 0;
    auto put = [&](const auto &m) {
      for (Eigen::Index i = 0; i < m.size(); ++i)
        v(k++) = m.data()[i];
    };
    for (const LstmBlock *blk : {&fwd, &bwd}) {
      put(blk->W);
      put(blk->U);
      put(blk->b);
    }
    put(w_out);
    v(k++) = b_out;
    return v;
  }

  void assign(const Eigen::VectorXd &v) {
    if (static_cast<std::size_t>(v.size()) != size())
      throw Error(ErrorKind::shape, "parameter vector has the wrong length");
    Eigen::Index k = 0;
    auto get = [&](auto &m) {
      for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = v(k++);
    };
    for (LstmBlock *blk : {&fwd, &bwd}) {
      get(blk->W);
      get(blk->U);
      get(blk->b);
    }
    get(w_out);
    b_out = v(k++);
  }
};

// Per-feature z-score statistics; binary columns keep mean 0 and scale 1.
struct Normalization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
};

struct TrainingConfig {
  double learning_rate = 1e-3;
  int max_epochs = 500;
  int patience = 25;
  double validation_fraction = 0.15;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0))
      throw Error(ErrorKind::configuration, "learning_rate must be > 0");
    if (max_epochs < 1)
      throw Error(ErrorKind::configuration, "max_epochs must be >= 1");
    if (patience < 1 || patience > max_epochs)
      throw Error(ErrorKind::configuration, "patience must be in [1, max_epochs]");
    if (!(validation_fraction > 0.0 && validation_fraction < 0.5))
      throw Error(ErrorKind::configuration, "validation_fraction must be in (0, 0.5)");
  }
};

struct Regressor {
  int input_dim = 0;
  int hidden = 5;
  std::uint64_t seed = 0;
  RegressorParams params;
  Normalization norm;
  // Metadata carried into the model file.
  FeatureSet feature_set = FeatureSet::S;
  TargetKind target = TargetKind::bpr;
  std::vector<std::string> columns;
  TrainingConfig training;
};

/// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; gate fan-in is D + H,
/// the head's is 2H. Biases start at zero except the forget gate (1).
inline Regressor init_regressor(int input_dim, int hidden, std::uint64_t seed) {
  if (input_dim < 1 || hidden < 1)
    throw Error(ErrorKind::configuration, "regressor dimensions must be positive");
  Regressor r;
  r.input_dim = input_dim;
  r.hidden = hidden;
  r.seed = seed;
  r.params = RegressorParams::zeros(input_dim, hidden);
  r.norm.mean = Eigen::VectorXd::Zero(input_dim);
  r.norm.scale = Eigen::VectorXd::Ones(input_dim);

  std::mt19937_64 rng(seed);
  const double gate_bound = 1.0 / std::sqrt(static_cast<double>(input_dim + hidden));
  std::uniform_real_distribution<double> gate(-gate_bound, gate_bound);
  for (LstmBlock *blk : {&r.params.fwd, &r.params.bwd}) {
    for (Eigen::Index i = 0; i < blk->W.size(); ++i)
      blk->W.data()[i] = gate(rng);
    for (Eigen::Index i = 0; i < blk->U.size(); ++i)
      blk->U.data()[i] = gate(rng);
    blk->b.segment(hidden, hidden).setOnes();
  }
  const double head_bound = 1.0 / std::sqrt(2.0 * hidden);
  std::uniform_real_distribution<double> head(-head_bound, head_bound);
  for (Eigen::Index i = 0; i < r.params.w_out.size(); ++i)
    r.params.w_out(i) = head(rng);
  return r;
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Activations of one direction, indexed by time step.
struct DirectionTrace {
  Eigen::MatrixXd gates; // 4H x T, post-activation [i; f; o; g]
  Eigen::MatrixXd c;     // H x T
  Eigen::MatrixXd h;     // H x T
};

struct Trace {
  DirectionTrace fwd, bwd;
  Eigen::VectorXd y;
};

inline DirectionTrace run_direction(const LstmBlock &blk, const Eigen::MatrixXd &x,
                                    bool reverse) {
  const Eigen::Index T = x.rows();
  const Eigen::Index H = blk.U.cols();
  DirectionTrace tr;
  tr.gates.resize(4 * H, T);
  tr.c.resize(H, T);
  tr.h.resize(H, T);
  Eigen::MatrixXd pre_in = blk.W * x.transpose(); // 4H x T
  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd a(4 * H);
  for (Eigen::Index s = 0; s < T; ++s) {
    const Eigen::Index t = reverse ? T - 1 - s : s;
    a = pre_in.col(t) + blk.U * h_prev + blk.b;
    for (Eigen::Index k = 0; k < 3 * H; ++k)
      a(k) = sigmoid(a(k));
    for (Eigen::Index k = 3 * H; k < 4 * H; ++k)
      a(k) = std::tanh(a(k));
    Eigen::VectorXd c = a.segment(H, H).cwiseProduct(c_prev) +
                        a.segment(0, H).cwiseProduct(a.segment(3 * H, H));
    Eigen::VectorXd h = a.segment(2 * H, H).cwiseProduct(c.array().tanh().matrix());
    tr.gates.col(t) = a;
    tr.c.col(t) = c;
    tr.h.col(t) = h;
    h_prev = h;
    c_prev = c;
  }
  return tr;
}

inline Trace run(const RegressorParams &p, const Eigen::MatrixXd &x) {
  Trace tr;
  tr.fwd = run_direction(p.fwd, x, false);
  tr.bwd = run_direction(p.bwd, x, true);
  const Eigen::Index H = p.fwd.U.cols();
  tr.y = (p.w_out.head(H).transpose() * tr.fwd.h + p.w_out.tail(H).transpose() * tr.bwd.h)
             .transpose();
  tr.y.array() += p.b_out;
  return tr;
}

// Accumulates gradients of one direction given dL/dh at every step.
inline void backprop_direction(const LstmBlock &blk, const DirectionTrace &tr,
                               const Eigen::MatrixXd &x, const Eigen::MatrixXd &dh_out,
                               bool reverse, LstmBlock &grad, Eigen::MatrixXd &dx) {
  const Eigen::Index T = x.rows();
  const Eigen::Index H = blk.U.cols();
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd da(4 * H);
  Eigen::MatrixXd da_all(4 * H, T);
  for (Eigen::Index s = T; s-- > 0;) {
    const Eigen::Index t = reverse ? T - 1 - s : s;
    const bool first = s == 0;
    const Eigen::Index t_prev = reverse ? t + 1 : t - 1;
    auto i = tr.gates.col(t).segment(0, H).array();
    auto f = tr.gates.col(t).segment(H, H).array();
    auto o = tr.gates.col(t).segment(2 * H, H).array();
    auto g = tr.gates.col(t).segment(3 * H, H).array();
    Eigen::ArrayXd tc = tr.c.col(t).array().tanh();
    Eigen::ArrayXd c_prev = Eigen::ArrayXd::Zero(H);
    if (!first)
      c_prev = tr.c.col(t_prev).array();

    Eigen::ArrayXd dh = dh_out.col(t).array() + dh_next.array();
    Eigen::ArrayXd dc = dc_next.array() + dh * o * (1.0 - tc * tc);
    da.segment(0, H) = (dc * g * i * (1.0 - i)).matrix();
    da.segment(H, H) = (dc * c_prev * f * (1.0 - f)).matrix();
    da.segment(2 * H, H) = (dh * tc * o * (1.0 - o)).matrix();
    da.segment(3 * H, H) = (dc * i * (1.0 - g * g)).matrix();
    da_all.col(t) = da;

    if (!first)
      grad.U.noalias() += da * tr.h.col(t_prev).transpose();
    dh_next.noalias() = blk.U.transpose() * da;
    dc_next = (dc * f).matrix();
  }
  grad.W.noalias() += da_all * x;
  grad.b += da_all.rowwise().sum();
  dx.noalias() += da_all.transpose() * blk.W;
}

struct Backward {
  RegressorParams grad;
  Eigen::MatrixXd dx; // T x D, w.r.t. the (normalized) inputs
};

// Backpropagates dL/dy (one entry per step) through both directions.
inline Backward backward(const RegressorParams &p, const Trace &tr, const Eigen::MatrixXd &x,
                         const Eigen::VectorXd &dy) {
  const Eigen::Index H = p.fwd.U.cols();
  const Eigen::Index T = x.rows();
  Backward out;
  out.grad = RegressorParams::zeros(static_cast<int>(x.cols()), static_cast<int>(H));
  out.dx = Eigen::MatrixXd::Zero(T, x.cols());
  out.grad.w_out.head(H) = tr.fwd.h * dy;
  out.grad.w_out.tail(H) = tr.bwd.h * dy;
  out.grad.b_out = dy.sum();
  Eigen::MatrixXd dh_f = p.w_out.head(H) * dy.transpose(); // H x T
  Eigen::MatrixXd dh_b = p.w_out.tail(H) * dy.transpose();
  backprop_direction(p.fwd, tr.fwd, x, dh_f, false, out.grad.fwd, out.dx);
  backprop_direction(p.bwd, tr.bwd, x, dh_b, true, out.grad.bwd, out.dx);
  return out;
}

inline void check_input(const Regressor &model, const FeatureMatrix &features) {
  if (static_cast<int>(features.width()) != model.input_dim)
    throw Error(ErrorKind::shape, "piece '" + features.piece_id + "': expected " +
                                      std::to_string(model.input_dim) + " feature columns, got " +
                                      std::to_string(features.width()));
  if (features.size() == 0)
    throw Error(ErrorKind::shape, "piece '" + features.piece_id + "' has no rows");
}

} // namespace detail

inline Eigen::MatrixXd normalize_rows(const Regressor &model, const Eigen::MatrixXd &rows) {
  return (rows.rowwise() - model.norm.mean.transpose()).array().rowwise() /
         model.norm.scale.transpose().array();
}

// Per-step predictions for one piece.
inline std::vector<double> forward(const Regressor &model, const FeatureMatrix &features) {
  detail::check_input(model, features);
  detail::Trace tr = detail::run(model.params, normalize_rows(model, features.rows));
  return {tr.y.data(), tr.y.data() + tr.y.size()};
}

struct GradientResult {
  double loss = 0.0;
  RegressorParams grad;
};

inline double mse(std::span<const double> pred, std::span<const double> target) {
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

/// Mean squared error over the steps of one piece and its gradient with
/// respect to every parameter, by backpropagation through time.
inline GradientResult gradients(const Regressor &model, const FeatureMatrix &features,
                                const TargetSeries &target) {
  detail::check_input(model, features);
  if (target.values.size() != features.size())
    throw Error(ErrorKind::shape, "piece '" + features.piece_id +
                                      "': target length differs from row count");
  Eigen::MatrixXd x = normalize_rows(model, features.rows);
  detail::Trace tr = detail::run(model.params, x);
  const auto T = static_cast<double>(x.rows());
  Eigen::VectorXd diff = tr.y - Eigen::Map<const Eigen::VectorXd>(
                                    target.values.data(), static_cast<Eigen::Index>(target.values.size()));
  GradientResult out;
  out.loss = diff.squaredNorm() / T;
  Eigen::VectorXd dy = 2.0 * diff / T;
  out.grad = detail::backward(model.params, tr, x, dy).grad;
  return out;
}

inline double loss(const Regressor &model, const FeatureMatrix &features,
                   const TargetSeries &target) {
  std::vector<double> pred = forward(model, features);
  return mse(pred, target.values);
}

/// Largest relative disagreement between analytic gradients and central
/// finite differences over all parameters.
inline double grad_check(const Regressor &model, const FeatureMatrix &features,
                         const TargetSeries &target, double epsilon) {
  const Eigen::VectorXd analytic = gradients(model, features, target).grad.flatten();
  const Eigen::VectorXd theta = model.params.flatten();
  Regressor probe = model;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd t = theta;
    t(k) = theta(k) + epsilon;
    probe.params.assign(t);
    const double up = loss(probe, features, target);
    t(k) = theta(k) - epsilon;
    probe.params.assign(t);
    const double down = loss(probe, features, target);
    const double numeric = (up - down) / (2.0 * epsilon);
    const double err = std::abs(analytic(k) - numeric) /
                       std::max(std::abs(analytic(k)) + std::abs(numeric), 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

struct TrainingExample {
  FeatureMatrix features;
  TargetSeries target;
};

struct TrainingResult {
  Regressor model;
  std::vector<double> train_loss;
  std::vector<double> validation_loss; // empty when validation is disabled
  int best_epoch = 0;
  std::vector<std::string> validation_pieces;
};

/// Per-column mean and standard deviation over the rows of `examples`.
/// Binary indicator columns and constant columns are left unscaled.
inline Normalization fit_normalization(std::span<const TrainingExample> examples,
                                       const std::vector<std::string> &columns) {
  const auto D = static_cast<Eigen::Index>(columns.size());
  Normalization n{Eigen::VectorXd::Zero(D), Eigen::VectorXd::Ones(D)};
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(D), sq = Eigen::VectorXd::Zero(D);
  double count = 0.0;
  for (const TrainingExample &e : examples) {
    sum += e.features.rows.colwise().sum().transpose();
    count += static_cast<double>(e.features.rows.rows());
  }
  if (count == 0.0)
    return n;
  Eigen::VectorXd mean = sum / count;
  for (const TrainingExample &e : examples)
    sq += (e.features.rows.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
  for (Eigen::Index j = 0; j < D; ++j) {
    if (is_binary_column(columns[static_cast<std::size_t>(j)]))
      continue;
    const double sd = std::sqrt(sq(j) / count);
    n.mean(j) = mean(j);
    n.scale(j) = sd > 1e-12 ? sd : 1.0;
  }
  return n;
}

namespace detail {

inline double mean_loss(const Regressor &model, std::span<const TrainingExample> examples,
                        std::span<const std::size_t> which) {
  double s = 0.0;
  for (std::size_t i : which)
    s += loss(model, examples[i].features, examples[i].target);
  return s / static_cast<double>(which.size());
}

} // namespace detail

/// Adam over whole-piece sequences in a seeded shuffled order, one update per
/// piece. A seeded subset of the pieces is held out for early stopping; with
/// too few pieces for that, training runs all epochs and keeps the epoch with
/// the lowest training loss. Normalization statistics are fit on the pieces
/// passed in and stored in the returned model.
inline TrainingResult train(const Regressor &initial, std::span<const TrainingExample> examples,
                            const TrainingConfig &config) {
  config.validate();
  if (examples.empty())
    throw Error(ErrorKind::training, "train: no training pieces");
  for (const TrainingExample &e : examples) {
    detail::check_input(initial, e.features);
    if (e.target.values.size() != e.features.size())
      throw Error(ErrorKind::shape, "piece '" + e.features.piece_id +
                                        "': target length differs from row count");
    if (!e.features.all_finite())
      throw Error(ErrorKind::training, "piece '" + e.features.piece_id +
                                           "' has non-finite features");
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(
      std::llround(config.validation_fraction * static_cast<double>(examples.size())));
  if (n_val >= examples.size())
    n_val = 0;
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> fit(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(fit.begin(), fit.end());

  TrainingResult result;
  Regressor model = initial;
  model.training = config;
  model.columns = examples.front().features.columns;
  model.feature_set = examples.front().features.feature_set;
  model.target = examples.front().target.kind;
  model.norm = fit_normalization(examples, model.columns);
  {
    double tsum = 0.0, tn = 0.0;
    for (std::size_t i : fit) {
      for (double v : examples[i].target.values)
        tsum += v;
      tn += static_cast<double>(examples[i].target.values.size());
    }
    model.params.b_out = tsum / tn;
  }
  for (std::size_t i : val)
    result.validation_pieces.push_back(examples[i].features.piece_id);

  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  Eigen::VectorXd theta = model.params.flatten();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(theta.size());
  std::uint64_t step = 0;

  Regressor best = model;
  double best_score = std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<std::size_t> epoch_order = fit;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(epoch_order.begin(), epoch_order.end(), rng);
    for (std::size_t i : epoch_order) {
      GradientResult g = gradients(model, examples[i].features, examples[i].target);
      if (!std::isfinite(g.loss))
        throw DivergenceError(epoch);
      const Eigen::VectorXd grad = g.grad.flatten();
      ++step;
      m1 = beta1 * m1 + (1.0 - beta1) * grad;
      m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      theta.array() -= config.learning_rate * (m1.array() / c1) /
                       ((m2.array() / c2).sqrt() + adam_eps);
      model.params.assign(theta);
    }
    const double train_loss = detail::mean_loss(model, examples, fit);
    if (!std::isfinite(train_loss))
      throw DivergenceError(epoch);
    result.train_loss.push_back(train_loss);
    double score = train_loss;
    if (!val.empty()) {
      score = detail::mean_loss(model, examples, val);
      if (!std::isfinite(score))
        throw DivergenceError(epoch);
      result.validation_loss.push_back(score);
    }
    if (score < best_score) {
      best_score = score;
      best = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (!val.empty() && ++since_best >= config.patience) {
      break;
    }
  }
  result.model = std::move(best);
  return result;
}

namespace detail {

inline nlohmann::json matrix_json(const Eigen::MatrixXd &m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from(const nlohmann::json &j, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  if (static_cast<Eigen::Index>(j.size()) != rows)
    throw Error(ErrorKind::model, "matrix has the wrong number of rows");
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols)
      throw Error(ErrorKind::model, "matrix has the wrong number of columns");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

inline nlohmann::json vector_json(const Eigen::VectorXd &v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd vector_from(const nlohmann::json &j, Eigen::Index n) {
  std::vector<double> v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != n)
    throw Error(ErrorKind::model, "vector has the wrong length");
  return Eigen::Map<Eigen::VectorXd>(v.data(), n);
}

} // namespace detail

inline nlohmann::json to_json(const TrainingConfig &c) {
  return {{"learning_rate", c.learning_rate},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"validation_fraction", c.validation_fraction},
          {"seed", c.seed}};
}

inline TrainingConfig training_config_from_json(const nlohmann::json &j) {
  TrainingConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline nlohmann::json to_json(const Regressor &r) {
  nlohmann::json j;
  j["format"] = "perfexp-regressor";
  j["version"] = 1;
  j["input_dim"] = r.input_dim;
  j["hidden"] = r.hidden;
  j["seed"] = r.seed;
  j["feature_set"] = std::string(to_string(r.feature_set));
  j["target"] = std::string(to_string(r.target));
  j["columns"] = r.columns;
  j["training_config"] = to_json(r.training);
  j["normalization"] = {{"mean", detail::vector_json(r.norm.mean)},
                        {"scale", detail::vector_json(r.norm.scale)}};
  nlohmann::json params;
  for (auto [name, blk] : {std::pair{"forward", &r.params.fwd}, std::pair{"backward", &r.params.bwd}}) {
    params[name] = {{"W", detail::matrix_json(blk->W)},
                    {"U", detail::matrix_json(blk->U)},
                    {"b", detail::vector_json(blk->b)}};
  }
  params["w_out"] = detail::vector_json(r.params.w_out);
  params["b_out"] = r.params.b_out;
  j["parameters"] = params;
  return j;
}

inline Regressor regressor_from_json(const nlohmann::json &j) {
  try {
    if (j.at("format").get<std::string>() != "perfexp-regressor" ||
        j.at("version").get<int>() != 1)
      throw Error(ErrorKind::model, "unsupported regressor format");
    Regressor r;
    r.input_dim = j.at("input_dim").get<int>();
    r.hidden = j.at("hidden").get<int>();
    if (r.input_dim < 1 || r.hidden < 1)
      throw Error(ErrorKind::model, "regressor dimensions must be positive");
    r.seed = j.at("seed").get<std::uint64_t>();
    r.feature_set = feature_set_from_string(j.at("feature_set").get<std::string>());
    r.target = target_from_string(j.at("target").get<std::string>());
    r.columns = j.at("columns").get<std::vector<std::string>>();
    r.training = training_config_from_json(j.at("training_config"));
    const Eigen::Index D = r.input_dim, H = r.hidden;
    r.norm.mean = detail::vector_from(j.at("normalization").at("mean"), D);
    r.norm.scale = detail::vector_from(j.at("normalization").at("scale"), D);
    const auto &params = j.at("parameters");
    for (auto [name, blk] : {std::pair{"forward", &r.params.fwd}, std::pair{"backward", &r.params.bwd}}) {
      blk->W = detail::matrix_from(params.at(name).at("W"), 4 * H, D);
      blk->U = detail::matrix_from(params.at(name).at("U"), 4 * H, H);
      blk->b = detail::vector_from(params.at(name).at("b"), 4 * H);
    }
    r.params.w_out = detail::vector_from(params.at("w_out"), 2 * H);
    r.params.b_out = params.at("b_out").get<double>();
    return r;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::model, std::string("malformed regressor: ") + e.what());
  }
}

} // namespace perfexp

#endif
