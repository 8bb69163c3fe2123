#pragma once

#include "kmp/adam.hpp"
#include "kmp/autodiff.hpp"
#include "kmp/binary_io.hpp"
#include "kmp/common.hpp"
#include "kmp/data_io.hpp"
#include "kmp/distill.hpp"
#include "kmp/eigen_sym.hpp"
#include "kmp/eval.hpp"
#include "kmp/experiment.hpp"
#include "kmp/graph.hpp"
#include "kmp/kernels.hpp"
#include "kmp/models.hpp"
#include "kmp/pe.hpp"
#include "kmp/sparse.hpp"
#include "kmp/tensor.hpp"
