#ifndef MPMFG_MPMFG_HPP
#define MPMFG_MPMFG_HPP

#include "mpmfg/core.hpp"
#include "mpmfg/epidemic.hpp"
#include "mpmfg/evaluation.hpp"
#include "mpmfg/experiment.hpp"
#include "mpmfg/ggrs.hpp"
#include "mpmfg/metrics.hpp"
#include "mpmfg/mirror.hpp"
#include "mpmfg/model.hpp"
#include "mpmfg/oracle_sim.hpp"
#include "mpmfg/parallel.hpp"
#include "mpmfg/population.hpp"
#include "mpmfg/random.hpp"
#include "mpmfg/regularizer.hpp"

#endif  // MPMFG_MPMFG_HPP
