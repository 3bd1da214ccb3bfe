#pragma once

#include "error.hpp"
#include "geometry.hpp"
#include "node_label.hpp"
#include "paving_tree.hpp"
#include "random.hpp"
#include "srp_histogram.hpp"
#include "pqmc.hpp"
#include "smoothing.hpp"
#include "distributed_builder.hpp"
#include "sampling.hpp"
#include "pipeline.hpp"
