#pragma once

#include <Eigen/Dense>

namespace etd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

}  // namespace etd
