#pragma once

#include "core.hpp"
#include "mesh.hpp"
#include "mesh_generators.hpp"
#include "mesh_io.hpp"
#include "quadrature.hpp"
#include "basis.hpp"
#include "material.hpp"
#include "operators.hpp"
#include "expression.hpp"
#include "solver.hpp"
#include "sphere.hpp"
#include "output.hpp"
#include "benchmarks.hpp"
#include "config.hpp"
