#pragma once

#include "mlmc/allocation.hpp"
#include "mlmc/batch.hpp"
#include "mlmc/config.hpp"
#include "mlmc/ctmc.hpp"
#include "mlmc/driver.hpp"
#include "mlmc/error.hpp"
#include "mlmc/experiment.hpp"
#include "mlmc/payoffs.hpp"
#include "mlmc/random.hpp"
#include "mlmc/rates.hpp"
#include "mlmc/samplers.hpp"
#include "mlmc/sde.hpp"
#include "mlmc/statistics.hpp"
