#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "flocksim/rng.hpp"

namespace flocksim::learn {

// Labeled feature matrix; one sample per row.
struct Dataset {
  Eigen::MatrixXd features;  // N x d
  Eigen::VectorXi labels;    // N, values in [0, C)
  int domain_id = 0;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

enum class ModelKind { kLogistic, kMlp1 };

// Layer dimensions of the classifier; fixes the parameter layout.
// logistic: [W (C x d, row-major), b (C)]
// mlp1:     [W1 (h x d), b1 (h), W2 (C x h), b2 (C)], tanh hidden layer
struct ParamShape {
  ModelKind kind = ModelKind::kLogistic;
  int features = 0;
  int classes = 0;
  int hidden = 0;  // mlp1 only

  Eigen::Index param_count() const;
  bool operator==(const ParamShape&) const = default;
};

// Flat model parameters plus the shape that interprets them.
struct ParamVector {
  ParamShape shape;
  Eigen::VectorXd values;

  bool compatible_with(const ParamVector& o) const { return shape == o.shape; }
};

ParamVector zero_params(const ParamShape& shape);
ParamVector init_params(const ParamShape& shape, RngStream& stream);

struct TrainerConfig {
  int local_epochs = 1;
  int batch_size = 32;
  double learning_rate = 0.05;
  ModelKind model_kind = ModelKind::kMlp1;
  int hidden = 32;  // mlp1 width
};

// Synthetic multi-domain classification task. Every domain draws
// class-conditional Gaussian clusters whose centers live in a shared signal
// subspace; each domain applies its own partial rotation and a shift of the
// cluster layout, so models transfer across domains only imperfectly. The
// trailing noise_dims features carry no class signal in any domain.
struct DomainSpec {
  int domains = 8;
  int features = 20;
  int classes = 4;
  int samples_per_domain = 2000;
  int noise_dims = 3;
  double separation = 3.0;       // class center radius
  double domain_rotation = 0.35; // 0 = shared layout, 1 = fully random per domain
  double domain_shift = 0.5;     // center offset, in units of separation
  double cluster_std = 1.0;
};

void validate(const DomainSpec& spec);  // throws std::invalid_argument

struct DomainData {
  Dataset train;
  Dataset test;
};

// Deterministic per seed; train/test split is 80/20.
std::vector<DomainData> synth_domains(const DomainSpec& spec, std::uint64_t seed);

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

// Mean cross-entropy over the batch and its gradient. Throws on non-finite
// features or empty batch.
LossGrad loss_and_grad(const ParamVector& params, const Eigen::MatrixXd& batch_x,
                       const Eigen::VectorXi& batch_y);

// local_epochs passes of mini-batch SGD with per-epoch shuffling.
ParamVector local_train(const ParamVector& params, const Dataset& data,
                        const TrainerConfig& config, RngStream& stream);

// Size-weighted parameter mean.
ParamVector fedavg(const ParamVector& global, std::span<const ParamVector> client_params,
                   std::span<const double> client_sizes);

struct ScaffoldState {
  ParamVector server_control;
  std::vector<ParamVector> client_controls;
};

ScaffoldState make_scaffold_state(const ParamShape& shape, std::size_t num_clients);

// One SCAFFOLD round: clients run control-variate-corrected SGD, controls
// update by the cheap rule c_i <- c_i - c + (x - y_i)/(K*eta), and the server
// averages parameter and control deltas. A client with a submit override
// contributes the overridden parameters instead of its honest result.
std::pair<ParamVector, ScaffoldState> scaffold_round(
    const ParamVector& global, const ScaffoldState& state,
    std::span<const Dataset> client_data, const TrainerConfig& config,
    std::span<RngStream> streams,
    std::span<const std::optional<ParamVector>> submit_override = {});

struct FedAdamState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  double server_lr = 0.1;
  int step = 0;
};

FedAdamState make_fedadam_state(const ParamShape& shape, double beta1 = 0.9,
                                double beta2 = 0.99, double epsilon = 1e-8,
                                double server_lr = 0.1);

// Server-side Adam on the pseudo-gradient global - fedavg(clients), with
// bias correction.
std::pair<ParamVector, FedAdamState> fedadam_round(
    const ParamVector& global, const FedAdamState& state,
    std::span<const ParamVector> client_params, std::span<const double> client_sizes);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
};

EvalResult evaluate(const ParamVector& params, const Dataset& data);

// Entry (a, b) = accuracy of models[a] on test_sets[b].
Eigen::MatrixXd cross_domain_matrix(std::span<const ParamVector> models,
                                    std::span<const Dataset> test_sets);

// CSV with a header row, feature columns first, label last.
void dataset_to_csv(const Dataset& data, std::ostream& out);
Dataset dataset_from_csv(std::istream& in, int domain_id = 0);

}  // namespace flocksim::learn
