#include "flocksim/learning.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "flocksim/util.hpp"

namespace flocksim::learn {

namespace {

using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LogisticView {
  Eigen::Map<const RowMajorMat> w;
  Eigen::Map<const Eigen::VectorXd> b;
};

struct Mlp1View {
  Eigen::Map<const RowMajorMat> w1;
  Eigen::Map<const Eigen::VectorXd> b1;
  Eigen::Map<const RowMajorMat> w2;
  Eigen::Map<const Eigen::VectorXd> b2;
};

LogisticView logistic_view(const ParamShape& s, const double* p) {
  return {Eigen::Map<const RowMajorMat>(p, s.classes, s.features),
          Eigen::Map<const Eigen::VectorXd>(p + s.classes * s.features, s.classes)};
}

Mlp1View mlp1_view(const ParamShape& s, const double* p) {
  const double* w1 = p;
  const double* b1 = w1 + s.hidden * s.features;
  const double* w2 = b1 + s.hidden;
  const double* b2 = w2 + s.classes * s.hidden;
  return {Eigen::Map<const RowMajorMat>(w1, s.hidden, s.features),
          Eigen::Map<const Eigen::VectorXd>(b1, s.hidden),
          Eigen::Map<const RowMajorMat>(w2, s.classes, s.hidden),
          Eigen::Map<const Eigen::VectorXd>(b2, s.classes)};
}

void check_shape(const ParamShape& s) {
  if (s.features < 1 || s.classes < 1)
    throw std::invalid_argument("model shape: features and classes must be >= 1");
  if (s.kind == ModelKind::kMlp1 && s.hidden < 1)
    throw std::invalid_argument("model shape: mlp1 hidden width must be >= 1");
}

// Row-wise logits for a batch.
Eigen::MatrixXd forward_logits(const ParamVector& params, const Eigen::MatrixXd& x,
                               Eigen::MatrixXd* hidden_out = nullptr) {
  const ParamShape& s = params.shape;
  if (x.cols() != s.features)
    throw std::invalid_argument("batch feature dimension does not match model");
  if (s.kind == ModelKind::kLogistic) {
    const auto v = logistic_view(s, params.values.data());
    return (x * v.w.transpose()).rowwise() + v.b.transpose();
  }
  const auto v = mlp1_view(s, params.values.data());
  Eigen::MatrixXd h = ((x * v.w1.transpose()).rowwise() + v.b1.transpose());
  h = h.array().tanh().matrix();
  if (hidden_out != nullptr) *hidden_out = h;
  return (h * v.w2.transpose()).rowwise() + v.b2.transpose();
}

// Stable per-row softmax probabilities and mean cross-entropy.
double softmax_and_loss(const Eigen::MatrixXd& logits, const Eigen::VectorXi& y,
                        Eigen::MatrixXd* probs_out) {
  const Eigen::Index b = logits.rows();
  Eigen::MatrixXd p = logits;
  double loss = 0.0;
  for (Eigen::Index r = 0; r < b; ++r) {
    const double zmax = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - zmax).exp();
    const double sum = p.row(r).sum();
    loss += std::log(sum) - (logits(r, y(r)) - zmax);
    p.row(r) /= sum;
  }
  if (probs_out != nullptr) *probs_out = std::move(p);
  return loss / static_cast<double>(b);
}

int num_batches(Eigen::Index n, int batch_size) {
  return static_cast<int>((n + batch_size - 1) / batch_size);
}

void validate_trainer_config(const TrainerConfig& c) {
  if (c.local_epochs < 0) throw std::invalid_argument("local_epochs must be >= 0");
  if (c.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  // A zero rate makes training the identity; scenario configs are stricter
  // and require a positive rate.
  if (!(c.learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
}

// Gram-Schmidt with a fixed column order; degenerate columns fall back to
// unit vectors so the result is always orthonormal.
void orthonormalize_columns(Eigen::MatrixXd& a) {
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    for (Eigen::Index k = 0; k < c; ++k) {
      a.col(c) -= a.col(k).dot(a.col(c)) * a.col(k);
    }
    double norm = a.col(c).norm();
    if (norm < 1e-12) {
      a.col(c).setZero();
      a(c % a.rows(), c) = 1.0;
      for (Eigen::Index k = 0; k < c; ++k) {
        a.col(c) -= a.col(k).dot(a.col(c)) * a.col(k);
      }
      norm = a.col(c).norm();
    }
    a.col(c) /= norm;
  }
}

Eigen::VectorXd random_normal_vector(RngStream& stream, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = stream.next_normal();
  return v;
}

}  // namespace

Eigen::Index ParamShape::param_count() const {
  if (kind == ModelKind::kLogistic) {
    return static_cast<Eigen::Index>(classes) * features + classes;
  }
  return static_cast<Eigen::Index>(hidden) * features + hidden +
         static_cast<Eigen::Index>(classes) * hidden + classes;
}

ParamVector zero_params(const ParamShape& shape) {
  check_shape(shape);
  return {shape, Eigen::VectorXd::Zero(shape.param_count())};
}

ParamVector init_params(const ParamShape& shape, RngStream& stream) {
  check_shape(shape);
  ParamVector p = zero_params(shape);
  // Weights ~ N(0, 1/fan_in); biases zero.
  auto fill = [&stream](Eigen::Ref<Eigen::VectorXd> block, int fan_in) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < block.size(); ++i) {
      block(i) = scale * stream.next_normal();
    }
  };
  if (shape.kind == ModelKind::kLogistic) {
    fill(p.values.head(static_cast<Eigen::Index>(shape.classes) * shape.features),
         shape.features);
  } else {
    const Eigen::Index w1 = static_cast<Eigen::Index>(shape.hidden) * shape.features;
    const Eigen::Index w2_off = w1 + shape.hidden;
    fill(p.values.head(w1), shape.features);
    fill(p.values.segment(w2_off, static_cast<Eigen::Index>(shape.classes) * shape.hidden),
         shape.hidden);
  }
  return p;
}

LossGrad loss_and_grad(const ParamVector& params, const Eigen::MatrixXd& batch_x,
                       const Eigen::VectorXi& batch_y) {
  check_shape(params.shape);
  const Eigen::Index b = batch_x.rows();
  if (b == 0) throw std::invalid_argument("loss_and_grad: empty batch");
  if (b != batch_y.size())
    throw std::invalid_argument("loss_and_grad: feature/label row mismatch");
  if (!batch_x.allFinite())
    throw std::invalid_argument("loss_and_grad: non-finite features");
  const ParamShape& s = params.shape;
  for (Eigen::Index r = 0; r < b; ++r) {
    if (batch_y(r) < 0 || batch_y(r) >= s.classes)
      throw std::invalid_argument("loss_and_grad: label out of range");
  }

  LossGrad out;
  out.grad = Eigen::VectorXd::Zero(params.values.size());

  Eigen::MatrixXd hidden;
  const Eigen::MatrixXd logits = forward_logits(params, batch_x, &hidden);
  Eigen::MatrixXd probs;
  out.loss = softmax_and_loss(logits, batch_y, &probs);

  // dZ = (P - onehot(y)) / B
  for (Eigen::Index r = 0; r < b; ++r) probs(r, batch_y(r)) -= 1.0;
  probs /= static_cast<double>(b);

  double* g = out.grad.data();
  if (s.kind == ModelKind::kLogistic) {
    Eigen::Map<RowMajorMat> gw(g, s.classes, s.features);
    Eigen::Map<Eigen::VectorXd> gb(g + s.classes * s.features, s.classes);
    gw = probs.transpose() * batch_x;
    gb = probs.colwise().sum().transpose();
  } else {
    const auto v = mlp1_view(s, params.values.data());
    Eigen::Map<RowMajorMat> gw1(g, s.hidden, s.features);
    Eigen::Map<Eigen::VectorXd> gb1(g + s.hidden * s.features, s.hidden);
    Eigen::Map<RowMajorMat> gw2(g + s.hidden * s.features + s.hidden, s.classes, s.hidden);
    Eigen::Map<Eigen::VectorXd> gb2(
        g + s.hidden * s.features + s.hidden + s.classes * s.hidden, s.classes);

    gw2 = probs.transpose() * hidden;
    gb2 = probs.colwise().sum().transpose();
    Eigen::MatrixXd dh = probs * v.w2;  // B x h
    dh.array() *= (1.0 - hidden.array().square());
    gw1 = dh.transpose() * batch_x;
    gb1 = dh.colwise().sum().transpose();
  }
  return out;
}

ParamVector local_train(const ParamVector& params, const Dataset& data,
                        const TrainerConfig& config, RngStream& stream) {
  validate_trainer_config(config);
  const Eigen::Index n = data.size();
  if (n == 0) throw std::invalid_argument("local_train: empty dataset");

  ParamVector w = params;
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);

  Eigen::MatrixXd bx;
  Eigen::VectorXi by;
  for (int epoch = 0; epoch < config.local_epochs; ++epoch) {
    stream.shuffle(perm);
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index bsize = std::min<Eigen::Index>(config.batch_size, n - start);
      bx.resize(bsize, data.dim());
      by.resize(bsize);
      for (Eigen::Index r = 0; r < bsize; ++r) {
        bx.row(r) = data.features.row(perm[static_cast<std::size_t>(start + r)]);
        by(r) = data.labels(perm[static_cast<std::size_t>(start + r)]);
      }
      const LossGrad lg = loss_and_grad(w, bx, by);
      w.values -= config.learning_rate * lg.grad;
    }
  }
  return w;
}

ParamVector fedavg(const ParamVector& global, std::span<const ParamVector> client_params,
                   std::span<const double> client_sizes) {
  if (client_params.empty()) throw std::invalid_argument("fedavg: no clients");
  if (client_params.size() != client_sizes.size())
    throw std::invalid_argument("fedavg: params/sizes length mismatch");
  double total = 0.0;
  for (double s : client_sizes) {
    if (s < 0.0) throw std::invalid_argument("fedavg: negative client size");
    total += s;
  }
  if (!(total > 0.0)) throw std::invalid_argument("fedavg: zero total size");

  ParamVector out = zero_params(global.shape);
  for (std::size_t i = 0; i < client_params.size(); ++i) {
    if (!client_params[i].compatible_with(global))
      throw std::invalid_argument("fedavg: client shape mismatch");
    out.values += (client_sizes[i] / total) * client_params[i].values;
  }
  return out;
}

ScaffoldState make_scaffold_state(const ParamShape& shape, std::size_t num_clients) {
  ScaffoldState st;
  st.server_control = zero_params(shape);
  st.client_controls.assign(num_clients, zero_params(shape));
  return st;
}

std::pair<ParamVector, ScaffoldState> scaffold_round(
    const ParamVector& global, const ScaffoldState& state,
    std::span<const Dataset> client_data, const TrainerConfig& config,
    std::span<RngStream> streams,
    std::span<const std::optional<ParamVector>> submit_override) {
  validate_trainer_config(config);
  const std::size_t nc = client_data.size();
  if (nc == 0) throw std::invalid_argument("scaffold_round: no clients");
  if (state.client_controls.size() != nc || streams.size() != nc)
    throw std::invalid_argument("scaffold_round: state/stream count mismatch");
  if (!submit_override.empty() && submit_override.size() != nc)
    throw std::invalid_argument("scaffold_round: override count mismatch");

  ScaffoldState next = state;
  ParamVector new_global = zero_params(global.shape);
  ParamVector control_delta_sum = zero_params(global.shape);

  Eigen::MatrixXd bx;
  Eigen::VectorXi by;
  for (std::size_t c = 0; c < nc; ++c) {
    const Dataset& data = client_data[c];
    const Eigen::Index n = data.size();
    if (n == 0) throw std::invalid_argument("scaffold_round: empty client dataset");
    const int k_steps = config.local_epochs * num_batches(n, config.batch_size);
    const double k_eta = static_cast<double>(k_steps) * config.learning_rate;
    if (!(k_eta > 0.0)) throw std::invalid_argument("scaffold_round: K*eta is zero");

    ParamVector y = global;
    const bool overridden = !submit_override.empty() && submit_override[c].has_value();
    if (overridden) {
      y = *submit_override[c];
      if (!y.compatible_with(global))
        throw std::invalid_argument("scaffold_round: override shape mismatch");
    } else {
      const Eigen::VectorXd correction =
          state.server_control.values - state.client_controls[c].values;
      std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      for (int epoch = 0; epoch < config.local_epochs; ++epoch) {
        streams[c].shuffle(perm);
        for (Eigen::Index start = 0; start < n; start += config.batch_size) {
          const Eigen::Index bsize = std::min<Eigen::Index>(config.batch_size, n - start);
          bx.resize(bsize, data.dim());
          by.resize(bsize);
          for (Eigen::Index r = 0; r < bsize; ++r) {
            bx.row(r) = data.features.row(perm[static_cast<std::size_t>(start + r)]);
            by(r) = data.labels(perm[static_cast<std::size_t>(start + r)]);
          }
          const LossGrad lg = loss_and_grad(y, bx, by);
          y.values -= config.learning_rate * (lg.grad + correction);
        }
      }
    }

    // Option II control update, applied to whatever the client submitted.
    Eigen::VectorXd new_control = state.client_controls[c].values -
                                  state.server_control.values +
                                  (global.values - y.values) / k_eta;
    control_delta_sum.values += new_control - state.client_controls[c].values;
    next.client_controls[c].values = std::move(new_control);
    new_global.values += y.values;
  }

  new_global.values /= static_cast<double>(nc);
  next.server_control.values += control_delta_sum.values / static_cast<double>(nc);
  return {std::move(new_global), std::move(next)};
}

FedAdamState make_fedadam_state(const ParamShape& shape, double beta1, double beta2,
                                double epsilon, double server_lr) {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("fedadam: betas must be in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("fedadam: epsilon must be > 0");
  if (!(server_lr > 0.0)) throw std::invalid_argument("fedadam: server_lr must be > 0");
  FedAdamState st;
  st.first_moment = Eigen::VectorXd::Zero(shape.param_count());
  st.second_moment = Eigen::VectorXd::Zero(shape.param_count());
  st.beta1 = beta1;
  st.beta2 = beta2;
  st.epsilon = epsilon;
  st.server_lr = server_lr;
  return st;
}

std::pair<ParamVector, FedAdamState> fedadam_round(
    const ParamVector& global, const FedAdamState& state,
    std::span<const ParamVector> client_params, std::span<const double> client_sizes) {
  const ParamVector avg = fedavg(global, client_params, client_sizes);
  if (state.first_moment.size() != global.values.size())
    throw std::invalid_argument("fedadam_round: state dimension mismatch");

  const Eigen::VectorXd delta = global.values - avg.values;
  FedAdamState next = state;
  next.step = state.step + 1;
  next.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * delta;
  next.second_moment = state.beta2 * state.second_moment +
                       (1.0 - state.beta2) * delta.array().square().matrix();

  const double bc1 = 1.0 - std::pow(state.beta1, next.step);
  const double bc2 = 1.0 - std::pow(state.beta2, next.step);
  const Eigen::ArrayXd m_hat = next.first_moment.array() / bc1;
  const Eigen::ArrayXd v_hat = next.second_moment.array() / bc2;

  ParamVector out = global;
  out.values.array() -= state.server_lr * m_hat / (v_hat.sqrt() + state.epsilon);
  return {std::move(out), std::move(next)};
}

EvalResult evaluate(const ParamVector& params, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  const Eigen::MatrixXd logits = forward_logits(params, data.features);
  EvalResult res;
  res.loss = softmax_and_loss(logits, data.labels, nullptr);
  Eigen::Index correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index pred = 0;
    logits.row(r).maxCoeff(&pred);
    if (static_cast<int>(pred) == data.labels(r)) ++correct;
  }
  res.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return res;
}

Eigen::MatrixXd cross_domain_matrix(std::span<const ParamVector> models,
                                    std::span<const Dataset> test_sets) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(models.size()),
                    static_cast<Eigen::Index>(test_sets.size()));
  for (std::size_t a = 0; a < models.size(); ++a) {
    for (std::size_t b = 0; b < test_sets.size(); ++b) {
      m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          evaluate(models[a], test_sets[b]).accuracy;
    }
  }
  return m;
}

void validate(const DomainSpec& spec) {
  if (spec.domains < 1) throw std::invalid_argument("data.domains must be >= 1");
  if (spec.features < 1) throw std::invalid_argument("data.features must be >= 1");
  if (spec.classes < 1) throw std::invalid_argument("data.classes must be >= 1");
  if (spec.samples_per_domain < 5)
    throw std::invalid_argument("data.samples_per_domain must be >= 5");
  if (spec.noise_dims < 0 || spec.noise_dims >= spec.features)
    throw std::invalid_argument("data.noise_dims must be in [0, features)");
  if (!(spec.separation > 0.0)) throw std::invalid_argument("data.separation must be > 0");
  if (spec.domain_rotation < 0.0 || spec.domain_rotation > 1.0)
    throw std::invalid_argument("data.domain_rotation must be in [0, 1]");
  if (spec.domain_shift < 0.0) throw std::invalid_argument("data.domain_shift must be >= 0");
  if (!(spec.cluster_std > 0.0)) throw std::invalid_argument("data.cluster_std must be > 0");
}

std::vector<DomainData> synth_domains(const DomainSpec& spec, std::uint64_t seed) {
  validate(spec);
  const Eigen::Index sig = spec.features - spec.noise_dims;
  const Eigen::Index c = spec.classes;

  // Shared class directions in the signal subspace.
  RngStream base = derive_stream(seed, "synth-base");
  Eigen::MatrixXd dirs(sig, c);
  for (Eigen::Index j = 0; j < c; ++j) dirs.col(j) = random_normal_vector(base, sig);
  if (c <= sig) {
    orthonormalize_columns(dirs);
  } else {
    for (Eigen::Index j = 0; j < c; ++j) dirs.col(j).normalize();
  }

  std::vector<DomainData> out;
  out.reserve(static_cast<std::size_t>(spec.domains));
  for (int t = 0; t < spec.domains; ++t) {
    RngStream st = derive_stream(seed, "synth-domain", static_cast<std::uint64_t>(t));

    Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(sig, sig);
    if (spec.domain_rotation > 0.0) {
      Eigen::MatrixXd g(sig, sig);
      for (Eigen::Index col = 0; col < sig; ++col) g.col(col) = random_normal_vector(st, sig);
      rot = (1.0 - spec.domain_rotation) * Eigen::MatrixXd::Identity(sig, sig) +
            spec.domain_rotation * g;
      orthonormalize_columns(rot);
    }

    Eigen::VectorXd shift = Eigen::VectorXd::Zero(sig);
    if (spec.domain_shift > 0.0) {
      Eigen::VectorXd g = random_normal_vector(st, sig);
      const double norm = g.norm();
      if (norm > 0.0) shift = (spec.domain_shift * spec.separation / norm) * g;
    }

    Eigen::MatrixXd centers(sig, c);
    for (Eigen::Index j = 0; j < c; ++j) {
      centers.col(j) = rot * (spec.separation * dirs.col(j)) + shift;
    }

    const Eigen::Index n = spec.samples_per_domain;
    Eigen::MatrixXd x(n, spec.features);
    Eigen::VectorXi y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index label = i % c;
      y(i) = static_cast<int>(label);
      for (Eigen::Index f = 0; f < sig; ++f) {
        x(i, f) = centers(f, label) + spec.cluster_std * st.next_normal();
      }
      for (Eigen::Index f = sig; f < spec.features; ++f) {
        x(i, f) = st.next_normal();
      }
    }

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    st.shuffle(perm);

    const Eigen::Index train_n = (n * 4) / 5;
    DomainData dd;
    dd.train.features.resize(train_n, spec.features);
    dd.train.labels.resize(train_n);
    dd.test.features.resize(n - train_n, spec.features);
    dd.test.labels.resize(n - train_n);
    dd.train.domain_id = t;
    dd.test.domain_id = t;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index src = perm[static_cast<std::size_t>(i)];
      if (i < train_n) {
        dd.train.features.row(i) = x.row(src);
        dd.train.labels(i) = y(src);
      } else {
        dd.test.features.row(i - train_n) = x.row(src);
        dd.test.labels(i - train_n) = y(src);
      }
    }
    out.push_back(std::move(dd));
  }
  return out;
}

void dataset_to_csv(const Dataset& data, std::ostream& out) {
  for (Eigen::Index f = 0; f < data.dim(); ++f) {
    out << 'f' << f << ',';
  }
  out << "label\n";
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    for (Eigen::Index f = 0; f < data.dim(); ++f) {
      out << format_double(data.features(r, f)) << ',';
    }
    out << data.labels(r) << '\n';
  }
}

Dataset dataset_from_csv(std::istream& in, int domain_id) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: missing header");
  Eigen::Index dim = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  if (dim < 1) throw std::invalid_argument("csv: header has no feature columns");

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(dim));
    std::size_t pos = 0;
    for (Eigen::Index f = 0; f < dim; ++f) {
      const std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) throw std::invalid_argument("csv: short row");
      row.push_back(parse_double(std::string_view(line).substr(pos, comma - pos)));
      pos = comma + 1;
    }
    labels.push_back(static_cast<int>(parse_double(std::string_view(line).substr(pos))));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("csv: no data rows");

  Dataset d;
  d.domain_id = domain_id;
  d.features.resize(static_cast<Eigen::Index>(rows.size()), dim);
  d.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Eigen::Index f = 0; f < dim; ++f) {
      d.features(static_cast<Eigen::Index>(r), f) = rows[r][static_cast<std::size_t>(f)];
    }
    d.labels(static_cast<Eigen::Index>(r)) = labels[r];
  }
  return d;
}

}  // namespace flocksim::learn
