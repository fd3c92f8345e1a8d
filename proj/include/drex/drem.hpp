// Convenience header pulling in the whole library.
#pragma once

#include "drex/core.hpp"
#include "drex/signals.hpp"
#include "drex/integrator.hpp"
#include "drex/filters.hpp"
#include "drex/mixing.hpp"
#include "drex/estimators.hpp"
#include "drex/simulation.hpp"
#include "drex/excitation.hpp"
#include "drex/scenario.hpp"
#include "drex/run.hpp"
