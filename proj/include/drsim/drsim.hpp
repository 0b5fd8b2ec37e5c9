#pragma once

#include "drsim/core.hpp"
#include "drsim/csv.hpp"
#include "drsim/dataio.hpp"
#include "drsim/spline.hpp"
#include "drsim/causality.hpp"
#include "drsim/clustering.hpp"
#include "drsim/metrics.hpp"
#include "drsim/neuralgen.hpp"
#include "drsim/gamgen.hpp"
#include "drsim/synthdata.hpp"
#include "drsim/pipeline.hpp"
