#include "flocksim/adversary.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace flocksim::adversary {

void validate(const BackdoorSpec& spec, int num_features, int num_classes) {
  if (spec.trigger_dims.empty())
    throw std::invalid_argument("attack.trigger_dims must be nonempty");
  std::set<int> seen;
  for (int d : spec.trigger_dims) {
    if (d < 0 || d >= num_features)
      throw std::invalid_argument("attack.trigger_dims index out of range");
    if (!seen.insert(d).second)
      throw std::invalid_argument("attack.trigger_dims contains duplicates");
  }
  if (spec.target_class < 0 || spec.target_class >= num_classes)
    throw std::invalid_argument("attack.target_class out of range");
  if (spec.poison_fraction < 0.0 || spec.poison_fraction > 1.0)
    throw std::invalid_argument("attack.poison_fraction must be in [0, 1]");
  if (spec.boost_factor < 0.0)
    throw std::invalid_argument("attack.boost_factor must be >= 0");
}

Eigen::MatrixXd apply_trigger(const Eigen::MatrixXd& features, const BackdoorSpec& spec) {
  Eigen::MatrixXd out = features;
  for (int d : spec.trigger_dims) {
    if (d < 0 || d >= out.cols())
      throw std::invalid_argument("attack.trigger_dims index out of range");
    out.col(d).setConstant(spec.trigger_value);
  }
  return out;
}

learn::Dataset poison_dataset(const learn::Dataset& data, const BackdoorSpec& spec,
                              RngStream& stream) {
  // Class-count validation happens where the problem size is known; here the
  // shard may simply not contain every class.
  validate(spec, static_cast<int>(data.dim()), spec.target_class + 1);
  learn::Dataset out = data;
  const Eigen::Index n = data.size();
  const auto count = static_cast<Eigen::Index>(
      std::llround(spec.poison_fraction * static_cast<double>(n)));
  if (count == 0) return out;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  stream.shuffle(order);
  for (Eigen::Index i = 0; i < count; ++i) {
    const Eigen::Index r = order[static_cast<std::size_t>(i)];
    for (int d : spec.trigger_dims) out.features(r, d) = spec.trigger_value;
    out.labels(r) = spec.target_class;
  }
  return out;
}

learn::ParamVector craft_malicious_update(const learn::ParamVector& global,
                                          const learn::Dataset& poisoned_data,
                                          const learn::TrainerConfig& config,
                                          const BackdoorSpec& spec, RngStream& stream) {
  if (spec.boost_factor == 0.0) return global;
  learn::ParamVector trained = learn::local_train(global, poisoned_data, config, stream);
  if (spec.boost_factor == 1.0) return trained;  // plain poisoned training, bit-exact
  learn::ParamVector out = global;
  out.values += spec.boost_factor * (trained.values - global.values);
  return out;
}

double attack_success_rate(const learn::ParamVector& model, const learn::Dataset& clean_test,
                           const BackdoorSpec& spec) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < clean_test.size(); ++r) {
    if (clean_test.labels(r) != spec.target_class) rows.push_back(r);
  }
  if (rows.empty()) throw std::invalid_argument("undefined ASR: no non-target test samples");

  Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), clean_test.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sub.row(static_cast<Eigen::Index>(i)) = clean_test.features.row(rows[i]);
  }
  sub = apply_trigger(sub, spec);

  learn::Dataset triggered;
  triggered.features = std::move(sub);
  triggered.labels = Eigen::VectorXi::Constant(static_cast<Eigen::Index>(rows.size()),
                                               spec.target_class);
  triggered.domain_id = clean_test.domain_id;
  // accuracy against the forced target labels is exactly the hit fraction
  return learn::evaluate(model, triggered).accuracy;
}

}  // namespace flocksim::adversary
