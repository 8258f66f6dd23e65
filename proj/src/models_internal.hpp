#pragma once

#include "godsbox/models.hpp"

namespace godsbox::models::detail {

/// Value of a hinge term and its derivative with respect to the deficit.
struct HingeTerm {
  double value = 0.0;
  double slope = 0.0;
};

HingeTerm squared_hinge(double deficit, double weight, const HyperParams& hyper);
HingeTerm linear_hinge(double deficit, const HyperParams& hyper);

Index argmin_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row);
Index argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row);

double subspace_score(const MatrixXd& w1, const VectorXd& b1, const MatrixXd& w2,
                      const VectorXd& b2, const HyperParams& hyper, const VectorXd& x);

VectorXd prepare_point(const VectorXd& x, Index d, bool normalize);

/// Validates hyperparameters against the data and applies row normalization.
DataMatrix prepare_training(const DataMatrix& data, const HyperParams& hyper);

}  // namespace godsbox::models::detail
