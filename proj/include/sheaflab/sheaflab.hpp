#pragma once

#include "sheaflab/block_sparse.hpp"
#include "sheaflab/dense.hpp"
#include "sheaflab/errors.hpp"
#include "sheaflab/graph.hpp"
#include "sheaflab/harness.hpp"
#include "sheaflab/neural/activation.hpp"
#include "sheaflab/neural/adam.hpp"
#include "sheaflab/neural/checkpoint.hpp"
#include "sheaflab/neural/init.hpp"
#include "sheaflab/neural/layers.hpp"
#include "sheaflab/neural/loss.hpp"
#include "sheaflab/neural/model.hpp"
#include "sheaflab/rng.hpp"
#include "sheaflab/sheaf.hpp"
#include "sheaflab/sheaf_io.hpp"
#include "sheaflab/spectral.hpp"
#include "sheaflab/synthgen.hpp"
