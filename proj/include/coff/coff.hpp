#pragma once

#include "coff/error.hpp"
#include "coff/estimation.hpp"
#include "coff/features.hpp"
#include "coff/geometry.hpp"
#include "coff/image.hpp"
#include "coff/io.hpp"
#include "coff/log.hpp"
#include "coff/losses.hpp"
#include "coff/matching.hpp"
#include "coff/metrics.hpp"
#include "coff/parallel.hpp"
#include "coff/pipeline.hpp"
#include "coff/sampling.hpp"
#include "coff/spatial_hash.hpp"
#include "coff/subsets.hpp"
#include "coff/synthetic.hpp"
