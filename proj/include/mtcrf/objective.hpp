#ifndef MTCRF_OBJECTIVE_HPP
#define MTCRF_OBJECTIVE_HPP

#include <vector>

namespace mtcrf {

/// Value of a function being maximized, with its gradient over the
/// flattened parameter vector.
struct Objective {
  double value = 0.0;
  std::vector<double> gradient;
};

}  // namespace mtcrf

#endif  // MTCRF_OBJECTIVE_HPP
