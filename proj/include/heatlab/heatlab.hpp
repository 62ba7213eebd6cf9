#pragma once

#include "heatlab/envelope.hpp"
#include "heatlab/envelope_fit.hpp"
#include "heatlab/error.hpp"
#include "heatlab/green_quad.hpp"
#include "heatlab/io.hpp"
#include "heatlab/mc_feynman_kac.hpp"
#include "heatlab/parallel.hpp"
#include "heatlab/pde_solver.hpp"
#include "heatlab/point.hpp"
#include "heatlab/potential.hpp"
#include "heatlab/reference_kernels.hpp"
#include "heatlab/rng.hpp"
