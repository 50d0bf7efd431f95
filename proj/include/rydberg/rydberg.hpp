#pragma once

#include "rydberg/errors.hpp"
#include "rydberg/lineshape.hpp"
#include "rydberg/optim.hpp"
#include "rydberg/random.hpp"
#include "rydberg/ritz.hpp"
#include "rydberg/stability.hpp"
#include "rydberg/synth.hpp"
#include "rydberg/pipeline/analysis.hpp"
#include "rydberg/pipeline/constants.hpp"
#include "rydberg/pipeline/energy.hpp"
#include "rydberg/pipeline/io.hpp"
#include "rydberg/pipeline/report.hpp"
#include "rydberg/pipeline/synth_specs.hpp"
