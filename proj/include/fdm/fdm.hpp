#pragma once

// Umbrella include.

#include "fdm/diffusion.hpp"
#include "fdm/evalbench.hpp"
#include "fdm/graph.hpp"
#include "fdm/parallel.hpp"
#include "fdm/param_set.hpp"
#include "fdm/rng.hpp"
#include "fdm/schedule.hpp"
#include "fdm/scheme_opt.hpp"
#include "fdm/schemes.hpp"
#include "fdm/svg.hpp"
#include "fdm/taskdist.hpp"
#include "fdm/tensor.hpp"
#include "fdm/video.hpp"
