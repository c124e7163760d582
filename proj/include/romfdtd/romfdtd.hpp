#pragma once

#include "romfdtd/cfl_extension.hpp"
#include "romfdtd/constants.hpp"
#include "romfdtd/coupling.hpp"
#include "romfdtd/error.hpp"
#include "romfdtd/fine_system.hpp"
#include "romfdtd/mor.hpp"
#include "romfdtd/scenario_io.hpp"
#include "romfdtd/simulator.hpp"
#include "romfdtd/yee_grid.hpp"
