#pragma once

#include <Eigen/Dense>

namespace pasa {

using Real = double;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

} // namespace pasa
