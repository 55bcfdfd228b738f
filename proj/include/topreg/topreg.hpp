#pragma once

// Umbrella header for the topology-preserving registration-based
// segmentation library.

#include "topreg/grid.hpp"
#include "topreg/tets.hpp"
#include "topreg/image_model.hpp"
#include "topreg/hyperelastic.hpp"
#include "topreg/fitting.hpp"
#include "topreg/krylov.hpp"
#include "topreg/optimizer.hpp"
#include "topreg/multilevel.hpp"
#include "topreg/segmenter.hpp"
#include "topreg/io.hpp"
