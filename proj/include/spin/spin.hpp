#ifndef SPIN_SPIN_HPP
#define SPIN_SPIN_HPP

#include "spin/core.hpp"
#include "spin/circular.hpp"
#include "spin/manifolds.hpp"
#include "spin/measurement.hpp"
#include "spin/geometry.hpp"
#include "spin/solver.hpp"
#include "spin/io.hpp"
#include "spin/experiments.hpp"

#endif  // SPIN_SPIN_HPP
