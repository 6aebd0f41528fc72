#pragma once

#include "lca/colorspace.hpp"
#include "lca/error.hpp"
#include "lca/fsio.hpp"
#include "lca/image.hpp"
#include "lca/linalg.hpp"
#include "lca/matrix.hpp"
#include "lca/metrics.hpp"
#include "lca/model_io.hpp"
#include "lca/old.hpp"
#include "lca/rng.hpp"
#include "lca/stiefel.hpp"
#include "lca/synth.hpp"
