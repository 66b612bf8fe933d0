#ifndef FMMPC_FMMPC_HPP
#define FMMPC_FMMPC_HPP

#include <fmmpc/bem.hpp>
#include <fmmpc/bench.hpp>
#include <fmmpc/fem.hpp>
#include <fmmpc/fmm.hpp>
#include <fmmpc/geometry.hpp>
#include <fmmpc/kernels.hpp>
#include <fmmpc/krylov.hpp>
#include <fmmpc/preconditioner.hpp>
#include <fmmpc/quadtree.hpp>
#include <fmmpc/sparse.hpp>

#endif
