#ifndef JKOLAB_JKOLAB_HPP
#define JKOLAB_JKOLAB_HPP

#include "jkolab/functionals.hpp"
#include "jkolab/gaussian.hpp"
#include "jkolab/objective.hpp"
#include "jkolab/quantile1d.hpp"

namespace jkolab {

using Grid = QuantileGrid<double>;
using Map1D = MonotoneMap1D<double>;
using Gaussian = GaussianMeasure<double>;
using Affine = AffineMap<double>;
using Objective = ObjectiveSpec<double>;

}  // namespace jkolab

#endif  // JKOLAB_JKOLAB_HPP
