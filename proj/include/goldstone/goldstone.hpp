#pragma once

// Umbrella header.

#include "goldstone/version.hpp"
#include "goldstone/so_algebra.hpp"
#include "goldstone/models.hpp"
#include "goldstone/chain.hpp"
#include "goldstone/gauge.hpp"
#include "goldstone/optimizer.hpp"
#include "goldstone/trace_io.hpp"
#include "goldstone/brute_force.hpp"
#include "goldstone/experiment.hpp"
