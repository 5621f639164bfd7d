#pragma once

// AFDM with superimposed pilots: transforms, channel, estimation, detection
// and the Monte Carlo sweep harness.

#include "afdm/channel.hpp"
#include "afdm/daft.hpp"
#include "afdm/detection.hpp"
#include "afdm/estimation.hpp"
#include "afdm/pilot.hpp"
#include "afdm/receiver.hpp"
#include "afdm/sparse.hpp"
#include "afdm/sweep.hpp"
