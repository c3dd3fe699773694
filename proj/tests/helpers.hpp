#pragma once

#include <cmath>
#include <vector>

#include "locmoment/model.hpp"

namespace testutil {

using locmoment::model::BoundaryCondition;
using locmoment::model::Mode;
using locmoment::model::ModelSpec;

// 1d lattice Anderson box with n = 2L+1 sites
inline ModelSpec lattice1d(double half_width, double lambda,
                           BoundaryCondition bc = BoundaryCondition::Dirichlet) {
    ModelSpec s;
    s.dimension = 1;
    s.mode = Mode::Lattice;
    s.L = half_width;
    s.h = 1.0;
    s.lambda = lambda;
    s.bc = bc;
    return s;
}

inline ModelSpec grid2d(double half_width, double h, double lambda,
                        BoundaryCondition bc = BoundaryCondition::Dirichlet) {
    ModelSpec s;
    s.dimension = 2;
    s.mode = Mode::ContinuumGrid;
    s.L = half_width;
    s.h = h;
    s.lambda = lambda;
    s.bc = bc;
    return s;
}

// single-site box: H = 2 + lambda * eta (1d lattice Dirichlet, one point)
inline ModelSpec scalar_toy(double lambda) { return lattice1d(0.0, lambda); }

}  // namespace testutil
