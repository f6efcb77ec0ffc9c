#ifndef SSMVPR_SSMVPR_HPP
#define SSMVPR_SSMVPR_HPP

#include "binary_io.hpp"
#include "descriptor.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "filtering.hpp"
#include "parallel.hpp"
#include "pca.hpp"
#include "pipeline.hpp"
#include "spatial.hpp"
#include "synthetic.hpp"
#include "tensor_io.hpp"

#endif
