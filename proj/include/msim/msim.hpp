#pragma once

#include "msim/calibration/calibrate.hpp"
#include "msim/core/population.hpp"
#include "msim/engine/io.hpp"
#include "msim/engine/simulator.hpp"
#include "msim/health/calibration.hpp"
#include "msim/health/init.hpp"
#include "msim/health/studies.hpp"
#include "msim/interventions/intervention.hpp"
#include "msim/sampler/missingness.hpp"
