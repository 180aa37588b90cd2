#pragma once

#include "poisonlab/agent.hpp"
#include "poisonlab/attacker.hpp"
#include "poisonlab/config.hpp"
#include "poisonlab/csv.hpp"
#include "poisonlab/fd.hpp"
#include "poisonlab/harness.hpp"
#include "poisonlab/maze.hpp"
#include "poisonlab/mdp.hpp"
#include "poisonlab/oracle.hpp"
#include "poisonlab/plot.hpp"
#include "poisonlab/rng.hpp"
#include "poisonlab/samples.hpp"
#include "poisonlab/tables.hpp"
#include "poisonlab/testbeds.hpp"
