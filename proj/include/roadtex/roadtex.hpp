#pragma once

#include "roadtex/alignment.hpp"
#include "roadtex/baseline.hpp"
#include "roadtex/config.hpp"
#include "roadtex/decomposition.hpp"
#include "roadtex/error.hpp"
#include "roadtex/evaluate.hpp"
#include "roadtex/geometry.hpp"
#include "roadtex/gnorm.hpp"
#include "roadtex/image.hpp"
#include "roadtex/io.hpp"
#include "roadtex/parallel.hpp"
#include "roadtex/pipeline.hpp"
#include "roadtex/snakes.hpp"
#include "roadtex/synth.hpp"
