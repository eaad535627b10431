#ifndef SWARM_INIT_SWARM_INIT_HPP
#define SWARM_INIT_SWARM_INIT_HPP

#include "swarm_init/errors.hpp"
#include "swarm_init/numerics.hpp"
#include "swarm_init/orbit_core.hpp"
#include "swarm_init/drag_model.hpp"
#include "swarm_init/graph_topology.hpp"
#include "swarm_init/stage_propagation.hpp"
#include "swarm_init/safety_analysis.hpp"
#include "swarm_init/monte_carlo.hpp"
#include "swarm_init/config.hpp"
#include "swarm_init/cli_app.hpp"

#endif  // SWARM_INIT_SWARM_INIT_HPP
